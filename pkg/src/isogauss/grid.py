"""Rectangular coordinate charts and finite-difference calculus on sampled fields.

Array layout convention used throughout the package: a field sampled on a
chart with grid shape ``(N_1, ..., N_m)`` is stored as an ndarray of shape
``(N_1, ..., N_m, *index_shape)`` -- grid axes first, component indices
after.  Finite differencing appends the differentiation index as the *last*
axis, so ``grad_all(f)[..., i] == d f / d x_i``.

Stencils are 3-point second order everywhere: central in the interior,
one-sided on the two boundary layers (this is exactly ``np.gradient`` with
``edge_order=2``).  Residual maxima elsewhere in the package are taken over
``chart.interior`` only, which strips two layers per side so that quantities
built from two successive derivatives are free of one-sided-stencil noise.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Iterator

import numpy as np

from .errors import ConfigurationError, SamplingError

MIN_POINTS_PER_AXIS = 5


@dataclass(frozen=True)
class Chart:
    """A uniform rectangular grid over an open box in R^m."""

    m: int
    shape: tuple[int, ...]
    spacing: tuple[float, ...]
    origin: tuple[float, ...]

    def __post_init__(self):
        if self.m < 1:
            raise ConfigurationError(f"chart dimension must be >= 1, got {self.m}")
        for name, tup in (("shape", self.shape), ("spacing", self.spacing),
                          ("origin", self.origin)):
            if len(tup) != self.m:
                raise ConfigurationError(
                    f"chart {name} has length {len(tup)}, expected m = {self.m}")
        if any(n < MIN_POINTS_PER_AXIS for n in self.shape):
            raise ConfigurationError(
                f"grid too small for 2nd-order stencils: every axis needs "
                f">= {MIN_POINTS_PER_AXIS} points, got {self.shape}")
        if any(not np.isfinite(dx) or dx <= 0 for dx in self.spacing):
            raise ConfigurationError(f"spacings must be positive, got {self.spacing}")
        if any(not np.isfinite(x) for x in self.origin):
            raise ConfigurationError(f"origin must be finite, got {self.origin}")

    @property
    def num_points(self) -> int:
        return int(np.prod(self.shape))

    @property
    def interior(self) -> tuple[slice, ...]:
        """Slices selecting the region two layers away from every face."""
        return self.interior_slices(2)

    def interior_slices(self, margin: int) -> tuple[slice, ...]:
        """Interior with a chosen margin, clamped so the region is nonempty.

        A field produced by k successive finite differences carries one-sided
        truncation error on its outermost k layers, and differentiating it
        once more leaks that error one layer further in; checks pick their
        margin accordingly (2 for directly differentiated data, 4 for checks
        that differentiate derived fields).
        """
        return tuple(slice(min(margin, (n - 1) // 2), n - min(margin, (n - 1) // 2))
                     for n in self.shape)

    @property
    def center(self) -> tuple[int, ...]:
        return tuple(n // 2 for n in self.shape)

    @property
    def max_spacing(self) -> float:
        return max(self.spacing)

    def axes(self) -> list[np.ndarray]:
        return [self.origin[i] + self.spacing[i] * np.arange(self.shape[i])
                for i in range(self.m)]

    def mesh(self) -> np.ndarray:
        """Coordinates of every node, shape ``(*shape, m)``."""
        grids = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(grids, axis=-1)

    def node_coords(self, index: tuple[int, ...]) -> np.ndarray:
        return np.array([self.origin[i] + self.spacing[i] * index[i]
                         for i in range(self.m)])

    def refine(self, factor: int = 2) -> "Chart":
        """Same coordinate box with ``factor``-times finer spacing."""
        shape = tuple(factor * (n - 1) + 1 for n in self.shape)
        spacing = tuple(dx / factor for dx in self.spacing)
        return replace(self, shape=shape, spacing=spacing)


def build_chart(m: int, shape, spacing, origin=None) -> Chart:
    """Validated chart constructor (origin defaults to zero)."""
    if origin is None:
        origin = (0.0,) * m
    return Chart(m=m, shape=tuple(int(n) for n in shape),
                 spacing=tuple(float(dx) for dx in spacing),
                 origin=tuple(float(x) for x in origin))


@dataclass(frozen=True)
class Field:
    """A grid-sampled tensor: ``values[grid..., indices...]``.

    ``cov``/``con`` count covariant and contravariant manifold indices,
    ``amb`` counts ambient (R^n-valued) component axes.  The counts are
    bookkeeping for callers; numerical routines work on ``values`` directly.
    """

    chart: Chart
    values: np.ndarray
    cov: int = 0
    con: int = 0
    amb: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape[:self.chart.m] != self.chart.shape:
            raise ConfigurationError(
                f"field shape {v.shape} does not start with chart shape "
                f"{self.chart.shape}")
        if not np.all(np.isfinite(v)):
            node = _first_nonfinite_node(v, self.chart.m)
            raise SamplingError(f"non-finite field value at node {node}", node=node)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def index_shape(self) -> tuple[int, ...]:
        return self.values.shape[self.chart.m:]


def _first_nonfinite_node(values: np.ndarray, m: int) -> tuple[int, ...]:
    bad = ~np.isfinite(values)
    flat = np.argwhere(bad)[0]
    return tuple(int(i) for i in flat[:m])


def sample(chart: Chart, fn: Callable[[np.ndarray], np.ndarray],
           cov: int = 0, con: int = 0, amb: int = 0) -> Field:
    """Evaluate ``fn`` on the whole mesh.

    ``fn`` receives coordinates of shape ``(*grid, m)`` and must return the
    sampled values with the grid axes leading.  Non-finite output is rejected
    with the offending node index.
    """
    out = np.asarray(fn(chart.mesh()), dtype=float)
    if out.shape == chart.shape + ():
        pass
    elif out.shape[:chart.m] != chart.shape:
        raise ConfigurationError(
            f"evaluator returned shape {out.shape}, expected leading {chart.shape}")
    if not np.all(np.isfinite(out)):
        node = _first_nonfinite_node(out, chart.m)
        raise SamplingError(f"evaluator returned non-finite value at node {node}",
                            node=node)
    return Field(chart=chart, values=out, cov=cov, con=con, amb=amb)


def deriv(values: np.ndarray, chart: Chart, axis: int) -> np.ndarray:
    """Second-order finite difference along grid axis ``axis``."""
    if not 0 <= axis < chart.m:
        raise ConfigurationError(f"axis {axis} out of range for m = {chart.m}")
    return np.gradient(values, chart.spacing[axis], axis=axis, edge_order=2)


def grad_all(values: np.ndarray, chart: Chart) -> np.ndarray:
    """All first derivatives, stacked on a new trailing axis."""
    return np.stack([deriv(values, chart, a) for a in range(chart.m)], axis=-1)


def partial_derivative(f: Field, axis: int) -> Field:
    """Componentwise derivative of a Field; gains one covariant index (last)."""
    return Field(chart=f.chart, values=deriv(f.values, f.chart, axis),
                 cov=f.cov + 1, con=f.con, amb=f.amb)


def interior_max(chart: Chart, pointwise: np.ndarray, margin: int = 2) -> float:
    """Max of a per-node scalar over the interior region."""
    return float(np.max(pointwise[chart.interior_slices(margin)]))


def align_signs(chart: Chart, vectors: np.ndarray) -> np.ndarray:
    """Per-node +-1 factors making a sign-ambiguous vector field continuous.

    ``vectors`` holds one flat vector per node (trailing axis); the sign of
    each node is chosen so that its dot product with the already-aligned
    staircase neighbor is nonnegative.  Meaningful when the underlying field
    is continuous and nonvanishing, so adjacent raw vectors are near-parallel.
    """
    sign = np.ones(chart.shape)
    flat = vectors.reshape(chart.shape + (-1,))
    for idx, prev in staircase_orders(chart):
        if prev is None:
            continue
        d = float(np.dot(flat[idx], flat[prev])) * sign[prev]
        sign[idx] = 1.0 if d >= 0 else -1.0
    return sign


def staircase_orders(chart: Chart) -> Iterator[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Deterministic center-out, axis-ordered traversal.

    Yields ``(index, previous_index)`` pairs such that ``previous_index`` has
    already been yielded and differs from ``index`` by one step along a single
    axis.  The chart center is yielded first with ``previous_index = None``.
    Used wherever a per-node sign or frame has to be continued across the
    chart without seams.
    """
    base = chart.center
    yield base, None
    # grow the filled region one axis at a time: after handling axis a the
    # filled set is {indices free on axes <= a, at base on axes > a}
    filled_ranges = [range(b, b + 1) for b in base]
    for a in range(chart.m):
        n = chart.shape[a]
        b = base[a]
        prefix_iter = list(np.ndindex(*[len(r) for r in filled_ranges[:a]]))
        for side in (range(b + 1, n), range(b - 1, -1, -1)):
            for i in side:
                step = -1 if i < b else 1
                for pre in prefix_iter:
                    lead = tuple(filled_ranges[t][pre[t]] for t in range(a))
                    idx = lead + (i,) + base[a + 1:]
                    prev = lead + (i - step,) + base[a + 1:]
                    yield idx, prev
        filled_ranges[a] = range(n)
