"""Cubic lattice geometry and truncated-dipolar coupling tables.

Sites live on an L_x x L_y x L_z grid with unit spacing; site index m maps to
integer coordinates via C-order unravel, so m = (ix * L_y + iy) * L_z + iz.
Couplings depend only on the (periodically reduced) displacement between two
sites, which is what makes the FFT field path possible: the whole table is one
kernel array on the grid.

The dipolar rule is

    jz(d) = (1 - 3 cos^2 theta) / r^3,   jperp(d) = -jz(d) / 2,

with theta measured from the z axis and r = |d| (nearest-neighbor spacing 1,
so the axial nearest-neighbor jz is -2). Under periodic boundaries a
displacement component of magnitude L/2 (even L only) has two equivalent
images; ``minimum_image_split`` averages the coupling over the tied images
(weight 1/2 each) which preserves cubic symmetry, ``minimum_image_drop`` zeroes
such classes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional, Tuple

import numpy as np

from .errors import ConfigError

COUPLING_RULES = ("dipolar_truncated", "custom_table")
IMAGE_CONVENTIONS = ("minimum_image_split", "minimum_image_drop")


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry and coupling rule for a cubic spin lattice."""

    dims: Tuple[int, int, int]
    periodic: bool = True
    coupling_rule: str = "dipolar_truncated"
    image_convention: str = "minimum_image_split"
    # Only for coupling_rule="custom_table": {(dx,dy,dz): (jz, jperp)} with
    # displacements already reduced; symmetrized automatically.
    custom_table: Optional[Mapping[Tuple[int, int, int], Tuple[float, float]]] = field(
        default=None, compare=False
    )

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise ConfigError(f"lattice dims must be three integers >= 1, got {self.dims}")
        object.__setattr__(self, "dims", dims)
        if self.n_sites < 2:
            raise ConfigError("lattice must contain at least 2 sites")
        if self.coupling_rule not in COUPLING_RULES:
            raise ConfigError(f"unknown coupling_rule {self.coupling_rule!r}")
        if self.image_convention not in IMAGE_CONVENTIONS:
            raise ConfigError(f"unknown image_convention {self.image_convention!r}")
        if self.coupling_rule == "custom_table" and self.custom_table is None:
            raise ConfigError("coupling_rule='custom_table' requires a custom_table")

    @property
    def n_sites(self) -> int:
        lx, ly, lz = self.dims
        return lx * ly * lz

    def positions(self) -> np.ndarray:
        """Integer site coordinates, shape (N, 3), row m = unravel_index(m)."""
        grids = np.indices(self.dims).reshape(3, -1).T
        return np.ascontiguousarray(grids)


def dipolar_coupling(dx: float, dy: float, dz: float) -> float:
    """jz for a single displacement; zero for the null displacement."""
    r2 = dx * dx + dy * dy + dz * dz
    if r2 == 0.0:
        return 0.0
    cos2 = (dz * dz) / r2
    return (1.0 - 3.0 * cos2) / (r2 * math.sqrt(r2))


def _axis_images(d: int, length: int, periodic: bool) -> list[tuple[int, float]]:
    """Minimum-image candidates (value, weight) for one displacement component.

    ``d`` is the raw grid offset in [0, length). An even-length axis has a tie
    at d = length/2; both signed images are returned with weight 1/2.
    """
    if not periodic or length == 1:
        return [(d, 1.0)]
    alt = d - length
    if abs(d) < abs(alt):
        return [(d, 1.0)]
    if abs(alt) < abs(d):
        return [(alt, 1.0)]
    return [(d, 0.5), (alt, 0.5)]


def displacement_class(m: int, n: int, spec: LatticeSpec) -> np.ndarray:
    """Reduced displacement (position n minus position m) as an int 3-vector.

    Components are reduced to (-L/2, L/2]; for even L the tie-degenerate
    magnitude L/2 is reported with positive sign (the canonical
    representative -- how the tied images enter the coupling is decided by the
    spec's image_convention, not here). Without periodic boundaries the raw
    displacement is returned.
    """
    pm = np.asarray(np.unravel_index(m, spec.dims))
    pn = np.asarray(np.unravel_index(n, spec.dims))
    d = pn - pm
    if spec.periodic:
        for axis, length in enumerate(spec.dims):
            r = d[axis] % length
            d[axis] = r if r <= length // 2 else r - length
    return d


class CouplingTable:
    """Precomputed jz / jperp per displacement class.

    For periodic lattices the storage is a kernel array on the grid:
    ``jz_kernel[dx % Lx, dy % Ly, dz % Lz]`` is the coupling for that
    displacement class (image convention already applied). Pairwise lookup and
    the dense (N, N) matrices used by the direct field path are derived views
    of the same data; non-periodic lattices carry only the dense matrices (no
    FFT path). ``jperp`` is exactly ``-jz / 2`` under the dipolar rule.
    Instances are immutable after construction and safe to share across
    threads.
    """

    def __init__(
        self,
        spec: LatticeSpec,
        jz_kernel: Optional[np.ndarray] = None,
        jperp_kernel: Optional[np.ndarray] = None,
        jz_pairs: Optional[np.ndarray] = None,
        jperp_pairs: Optional[np.ndarray] = None,
    ):
        self.spec = spec
        self.jz_kernel = jz_kernel
        self.jperp_kernel = jperp_kernel
        self._pair_cache = None
        if jz_pairs is not None:
            self._pair_cache = (jz_pairs, jperp_pairs)
        for arr in (jz_kernel, jperp_kernel, jz_pairs, jperp_pairs):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def n_sites(self) -> int:
        return self.spec.n_sites

    @property
    def dims(self) -> Tuple[int, int, int]:
        return self.spec.dims

    @property
    def has_kernel(self) -> bool:
        return self.jz_kernel is not None

    @property
    def ratio_exact(self) -> bool:
        """True when jperp entries are bitwise -jz/2 (always for dipolar)."""
        if self.has_kernel:
            return np.array_equal(self.jperp_kernel, -0.5 * self.jz_kernel)
        jz, jp = self.pair_matrices()
        return np.array_equal(jp, -0.5 * jz)

    def pair(self, m: int, n: int) -> Tuple[float, float]:
        """(jz, jperp) between sites m and n."""
        if self.has_kernel:
            pm = np.unravel_index(m, self.dims)
            pn = np.unravel_index(n, self.dims)
            idx = tuple((int(pn[a]) - int(pm[a])) % self.dims[a] for a in range(3))
            return float(self.jz_kernel[idx]), float(self.jperp_kernel[idx])
        jz, jp = self.pair_matrices()
        return float(jz[m, n]), float(jp[m, n])

    def pair_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense (N, N) jz and jperp matrices (built lazily, cached)."""
        if self._pair_cache is None:
            pos = self.spec.positions()
            lx, ly, lz = self.dims
            dx = (pos[None, :, 0] - pos[:, None, 0]) % lx
            dy = (pos[None, :, 1] - pos[:, None, 1]) % ly
            dz = (pos[None, :, 2] - pos[:, None, 2]) % lz
            jz = np.ascontiguousarray(self.jz_kernel[dx, dy, dz])
            jp = np.ascontiguousarray(self.jperp_kernel[dx, dy, dz])
            jz.setflags(write=False)
            jp.setflags(write=False)
            self._pair_cache = (jz, jp)
        return self._pair_cache

    def classes(self) -> Iterator[tuple[int, int, int, float, float]]:
        """Iterate (dx, dy, dz, jz, jperp) over canonical displacement classes.

        Periodic: canonical component range (-L/2, L/2]. Non-periodic: all raw
        displacements occurring on the lattice. Sorted lexicographically.
        """
        rows = []
        if self.has_kernel:
            lx, ly, lz = self.dims

            def signed(idx: int, length: int) -> int:
                return idx if idx <= length // 2 else idx - length

            for ix, iy, iz in itertools.product(range(lx), range(ly), range(lz)):
                rows.append(
                    (
                        signed(ix, lx),
                        signed(iy, ly),
                        signed(iz, lz),
                        float(self.jz_kernel[ix, iy, iz]),
                        float(self.jperp_kernel[ix, iy, iz]),
                    )
                )
        else:
            lx, ly, lz = self.dims
            for dx, dy, dz in itertools.product(
                range(1 - lx, lx), range(1 - ly, ly), range(1 - lz, lz)
            ):
                jz = dipolar_coupling(dx, dy, dz)
                rows.append((dx, dy, dz, jz, -0.5 * jz))
        rows.sort(key=lambda r: (r[0], r[1], r[2]))
        return iter(rows)

    def per_site_jz_sum(self) -> float:
        """Sum of jz over all displacement classes (equals sum_n jz_mn).

        Only meaningful for periodic lattices, where it is site-independent.
        """
        if not self.has_kernel:
            raise ConfigError("per-site coupling sum is uniform only for periodic lattices")
        return float(np.sum(self.jz_kernel))


def build_couplings(spec: LatticeSpec) -> CouplingTable:
    """Build the coupling table for a lattice spec.

    Deterministic for a given spec. jperp is derived from jz in a single
    array operation so the -1/2 ratio is exact bit-for-bit under the dipolar
    rule.
    """
    if spec.coupling_rule == "custom_table":
        return _build_custom(spec)
    if not spec.periodic:
        return _build_open(spec)

    lx, ly, lz = spec.dims
    jz = np.zeros(spec.dims, dtype=np.float64)
    drop = spec.image_convention == "minimum_image_drop"
    for ix in range(lx):
        xs = _axis_images(ix, lx, True)
        for iy in range(ly):
            ys = _axis_images(iy, ly, True)
            for iz in range(lz):
                zs = _axis_images(iz, lz, True)
                if drop and (len(xs) > 1 or len(ys) > 1 or len(zs) > 1):
                    continue
                acc = 0.0
                for (vx, wx), (vy, wy), (vz, wz) in itertools.product(xs, ys, zs):
                    acc += wx * wy * wz * dipolar_coupling(vx, vy, vz)
                jz[ix, iy, iz] = acc
    jperp = -0.5 * jz
    return CouplingTable(spec, jz_kernel=jz, jperp_kernel=jperp)


def _build_open(spec: LatticeSpec) -> CouplingTable:
    pos = spec.positions().astype(np.float64)
    d = pos[None, :, :] - pos[:, None, :]
    r2 = np.sum(d * d, axis=2)
    np.fill_diagonal(r2, 1.0)  # avoid 0/0; diagonal zeroed below
    cos2 = (d[:, :, 2] ** 2) / r2
    jz = (1.0 - 3.0 * cos2) / (r2 * np.sqrt(r2))
    np.fill_diagonal(jz, 0.0)
    jz = np.ascontiguousarray(jz)
    jperp = -0.5 * jz
    return CouplingTable(spec, jz_pairs=jz, jperp_pairs=jperp)


def _build_custom(spec: LatticeSpec) -> CouplingTable:
    if not spec.periodic:
        raise ConfigError("custom_table coupling rule requires periodic boundaries")
    jz = np.zeros(spec.dims, dtype=np.float64)
    jp = np.zeros(spec.dims, dtype=np.float64)
    seen: dict[tuple[int, int, int], tuple[float, float]] = {}
    for disp, vals in spec.custom_table.items():
        d = tuple(int(v) for v in disp)
        if len(d) != 3:
            raise ConfigError(f"custom_table displacement {disp!r} is not a 3-vector")
        jz_v, jp_v = float(vals[0]), float(vals[1])
        if d == (0, 0, 0):
            if jz_v != 0.0 or jp_v != 0.0:
                raise ConfigError("custom_table self-coupling (0,0,0) must be zero")
            continue
        for rep in (d, tuple(-c for c in d)):  # table is unordered: J(d) = J(-d)
            idx = tuple(rep[a] % spec.dims[a] for a in range(3))
            if idx == (0, 0, 0):
                raise ConfigError(f"custom_table displacement {d} aliases zero on dims {spec.dims}")
            if idx in seen and seen[idx] != (jz_v, jp_v):
                raise ConfigError(f"custom_table entries conflict at displacement class {idx}")
            seen[idx] = (jz_v, jp_v)
            jz[idx] = jz_v
            jp[idx] = jp_v
    return CouplingTable(spec, jz_kernel=jz, jperp_kernel=jp)


def dump_couplings_csv(table: CouplingTable, fh) -> None:
    """Write the table as CSV with a JSON header comment line.

    Format: one ``# {...}`` line holding the lattice spec, then a header row
    ``dx,dy,dz,jz,jperp`` and one row per displacement class.
    """
    import json

    spec = table.spec
    header = {
        "dims": list(spec.dims),
        "periodic": spec.periodic,
        "coupling_rule": spec.coupling_rule,
        "image_convention": spec.image_convention,
    }
    fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
    fh.write("dx,dy,dz,jz,jperp\n")
    for dx, dy, dz, jz, jp in table.classes():
        fh.write(f"{dx},{dy},{dz},{jz:.17g},{jp:.17g}\n")
