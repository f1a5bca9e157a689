"""Classification of a solved utility field into market regions.

A solved field splits the type square into an excluded set (u = 0), bunching
sets where the discrete Hessian is rank deficient, and a customization set
where it has full rank.  Bunching is blunt when the near-null eigenvector of
the Hessian points along the anti-diagonal (utility depends on x1 + x2 only)
and targeted otherwise, with the targeted side named by the sign of x2 - x1.
The outer boundary of the non-customized set, written as a function
t(s) of the anti-diagonal coordinate s = x1 - x2 with t = x1 + x2, is the
interface curve separating bunching from customization.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np

from .errors import EmptyRegionError, ValidationError
from .grid_field import ScalarField, hessian
from .params import ModelParams


class RegionLabel(enum.IntEnum):
    EXCLUDED = 0
    BLUNT_BUNCH = 1
    TARGETED_MINUS = 2
    TARGETED_PLUS = 3
    CUSTOMIZED = 4


LABEL_NAMES = {
    RegionLabel.EXCLUDED: "excluded",
    RegionLabel.BLUNT_BUNCH: "blunt_bunch",
    RegionLabel.TARGETED_MINUS: "targeted_minus",
    RegionLabel.TARGETED_PLUS: "targeted_plus",
    RegionLabel.CUSTOMIZED: "customized",
}
NAME_TO_LABEL = {v: k for k, v in LABEL_NAMES.items()}


@dataclass(frozen=True)
class RegionMap:
    params: ModelParams
    labels: np.ndarray
    rank_tol: float
    zero_tol: float

    def __post_init__(self) -> None:
        n = self.params.n
        if self.labels.shape != (n, n):
            raise ValidationError(f"labels must be {n}x{n}")
        if not np.isin(self.labels, [int(r) for r in RegionLabel]).all():
            raise ValidationError("labels contain values outside the label set")
        self.labels.setflags(write=False)

    def fraction(self, label: RegionLabel) -> float:
        return float((self.labels == int(label)).mean())

    def count(self, label: RegionLabel) -> int:
        return int((self.labels == int(label)).sum())


@dataclass(frozen=True)
class InterfaceCurve:
    s: np.ndarray
    t: np.ndarray
    a: float

    def __post_init__(self) -> None:
        s = np.asarray(self.s, dtype=float)
        t = np.asarray(self.t, dtype=float)
        if s.ndim != 1 or s.shape != t.shape or s.size < 2:
            raise ValidationError("interface needs >= 2 aligned (s, t) samples")
        if not (np.diff(s) > 0).all():
            raise ValidationError("interface s-coordinates must increase strictly")
        if (t < 2 * self.a - 1e-9).any() or (t > 2 * self.a + 2 + 1e-9).any():
            raise ValidationError("interface t-values leave the square's t-range")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "t", t)
        s.setflags(write=False)
        t.setflags(write=False)

    def t_of(self, s: np.ndarray | float) -> np.ndarray | float:
        """Piecewise-linear interpolation; clamps outside the sampled range."""
        return np.interp(s, self.s, self.t)

    def spread(self) -> float:
        return float(self.t.max() - self.t.min())


def classify(
    u: ScalarField,
    rank_tol: float = 0.1,
    zero_tol: float = 1e-4,
    angle_window_deg: float = 4.0,
) -> RegionMap:
    """Label every node by value test and discrete Hessian rank.

    Excluded where |u| <= zero_tol; customized where both Hessian eigenvalues
    exceed rank_tol; otherwise a bunch, blunt when the near-null eigenvector
    lies within angle_window_deg of the anti-diagonal, and targeted (minus
    above the diagonal, plus below) when it does not.

    The defaults encode two measured scales.  rank_tol = 0.1 sits between the
    near-null eigenvalue of bunched nodes (O(h), below 0.05 for n >= 32) and
    the smaller eigenvalue on the customized region (above 0.3).  The angular
    window matters because the targeted bunches rotate away from the
    anti-diagonal continuously: at the top of the blunt strip the ray angle
    grows roughly one degree per 0.02 of x1+x2, so a wide window misattributes
    the first targeted rays to the blunt family.  4 degrees keeps the
    classified strip within about 0.08 of the true blunt top while staying an
    order of magnitude above the discrete-Hessian angular noise at n = 128.
    """
    if rank_tol <= 0 or zero_tol <= 0:
        raise ValidationError("rank_tol and zero_tol must be positive")
    hess = hessian(u)
    lo, hi = hess.eigenvalues()
    x1, x2 = u.params.meshgrid()

    # Near-null eigenvector of [[A,B],[B,C]] for the smaller eigenvalue;
    # of the two analytic forms pick the better conditioned per node.
    v1 = np.stack([hess.xy, lo - hess.xx], axis=-1)
    v2 = np.stack([lo - hess.yy, hess.xy], axis=-1)
    n1 = np.linalg.norm(v1, axis=-1)
    n2 = np.linalg.norm(v2, axis=-1)
    vec = np.where((n1 >= n2)[..., None], v1, v2)
    norms = np.maximum(np.linalg.norm(vec, axis=-1), 1e-300)
    # Degenerate case: Hessian is (near) a multiple of the identity, any
    # direction is null-ish; call it anti-diagonal so isotropic flats read
    # as blunt rather than targeted.
    isotropic = np.maximum(n1, n2) <= 1e-14 * (1.0 + np.abs(hi))
    cos_anti = np.abs(vec[..., 0] - vec[..., 1]) / (np.sqrt(2.0) * norms)
    cos_anti = np.where(isotropic, 1.0, np.clip(cos_anti, 0.0, 1.0))
    near_anti = cos_anti >= np.cos(np.deg2rad(angle_window_deg))

    labels = np.full(u.values.shape, int(RegionLabel.CUSTOMIZED), dtype=np.int8)
    bunched = lo <= rank_tol
    labels[bunched & near_anti] = int(RegionLabel.BLUNT_BUNCH)
    labels[bunched & ~near_anti & (x2 >= x1)] = int(RegionLabel.TARGETED_MINUS)
    labels[bunched & ~near_anti & (x2 < x1)] = int(RegionLabel.TARGETED_PLUS)
    labels[np.abs(u.values) <= zero_tol] = int(RegionLabel.EXCLUDED)
    return RegionMap(params=u.params, labels=labels, rank_tol=rank_tol, zero_tol=zero_tol)


def extract_interface(region_map: RegionMap) -> InterfaceCurve:
    """Upper envelope of the non-customized set, slice by anti-diagonal slice.

    For every grid value of s = x1 - x2 the interface height t(s) is the
    largest x1 + x2 over non-customized nodes on that slice; slices that are
    entirely customized (short slices near the corners) carry no sample.
    """
    params = region_map.params
    n, h, a = params.n, params.h, params.a
    labels = region_map.labels
    if not (labels == int(RegionLabel.CUSTOMIZED)).any():
        raise EmptyRegionError("no customized nodes; interface undefined")

    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    s_index = (ii - jj).ravel()  # s = s_index * h
    t_sum = (ii + jj).ravel()  # t = 2a + t_sum * h
    noncust = (labels != int(RegionLabel.CUSTOMIZED)).ravel()

    s_vals: list[float] = []
    t_vals: list[float] = []
    for k in range(-(n - 1), n):
        on_slice = s_index == k
        if not (noncust & on_slice).any():
            continue
        if not (~noncust & on_slice).any():
            # No customized node on this slice; the envelope is not an
            # interface against customization there.
            continue
        t_top = t_sum[noncust & on_slice].max()
        s_vals.append(k * h)
        t_vals.append(2 * a + t_top * h)
    if len(s_vals) < 2:
        raise EmptyRegionError("fewer than two interface samples")
    return InterfaceCurve(s=np.array(s_vals), t=np.array(t_vals), a=a)


def write_labels_csv(region_map: RegionMap, path) -> None:
    x1, x2 = region_map.params.meshgrid()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x1", "x2", "label"])
        flat = region_map.labels.ravel()
        for xa, xb, lab in zip(x1.ravel(), x2.ravel(), flat):
            writer.writerow([f"{xa:.17g}", f"{xb:.17g}", LABEL_NAMES[RegionLabel(int(lab))]])


def write_interface_csv(curve: InterfaceCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["s", "t"])
        for s, t in zip(curve.s, curve.t):
            writer.writerow([f"{s:.17g}", f"{t:.17g}"])


def read_interface_csv(path, a: float) -> InterfaceCurve:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [c.strip() for c in header] != ["s", "t"]:
            raise ValidationError(f"expected header 's,t' in {path}")
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
    if len(rows) < 2:
        raise ValidationError(f"{path} holds fewer than two samples")
    s = np.array([r[0] for r in rows])
    t = np.array([r[1] for r in rows])
    return InterfaceCurve(s=s, t=t, a=a)
