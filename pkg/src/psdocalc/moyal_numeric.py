"""Grid evaluation of the Moyal star product in one symplectic 2-plane.

For Theta = theta [[0, 1], [-1, 0]] the product is a twisted convolution
in Fourier space:

    (f*g)^(q) = sum_k f^(k) g^(q-k) exp(-i theta/2 (k1 q2 - k2 q1))

which is evaluated exactly on the discrete torus in O(N^3) with FFTs
along the second axis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate

DEFAULT_GRID = 128
DEFAULT_EXTENT = 16.0
DEFAULT_THETA = 0.5


@dataclass(frozen=True)
class GridField:
    """Complex samples on an N x N grid over [-L/2, L/2)^2 for one 2-plane."""

    values: np.ndarray
    extent: float
    theta: float

    def __post_init__(self):
        n = self.values.shape[0]
        if self.values.shape != (n, n):
            raise ValueError("grid must be square")
        if n & (n - 1):
            raise ValueError("grid size must be a power of two")

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def same_grid(self, other: "GridField") -> bool:
        return self.size == other.size and self.extent == other.extent and self.theta == other.theta

    def with_values(self, values: np.ndarray) -> "GridField":
        return GridField(np.asarray(values, dtype=complex), self.extent, self.theta)

    def integral(self) -> complex:
        h = self.extent / self.size
        return complex(self.values.sum() * h * h)

    def norm(self) -> float:
        h = self.extent / self.size
        return float(np.sqrt((np.abs(self.values) ** 2).sum()) * h)


def coordinates(n: int, extent: float) -> tuple:
    x = (np.arange(n) - n // 2) * (extent / n)
    return np.meshgrid(x, x, indexing="ij")


def wavenumbers(n: int, extent: float) -> np.ndarray:
    return 2 * np.pi * np.fft.fftfreq(n, d=extent / n)


def sample(fn, n: int = DEFAULT_GRID, extent: float = DEFAULT_EXTENT, theta: float = DEFAULT_THETA) -> GridField:
    """Sample fn(x, y) on the grid."""
    x, y = coordinates(n, extent)
    return GridField(np.asarray(fn(x, y), dtype=complex) * np.ones_like(x, dtype=complex), extent, theta)


def gaussian(
    center=(0.0, 0.0), width: float = 1.0, n: int = DEFAULT_GRID, extent: float = DEFAULT_EXTENT, theta: float = DEFAULT_THETA
) -> GridField:
    cx, cy = center
    return sample(lambda x, y: np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * width**2)), n, extent, theta)


@dataclass(frozen=True)
class StarPlan:
    """Phase tables for a fixed (N, L, theta)."""

    size: int
    extent: float
    theta: float
    phase_a: np.ndarray  # exp(+i a k2 q1) indexed [q1, k2]
    phase_b: np.ndarray  # exp(-i a k1 q2) indexed [k1, q2]
    shift_index: np.ndarray  # (q1 - k1) mod N indexed [k1, q1]

    @classmethod
    def build(cls, n: int = DEFAULT_GRID, extent: float = DEFAULT_EXTENT, theta: float = DEFAULT_THETA) -> "StarPlan":
        k = wavenumbers(n, extent)
        a = theta / 2
        phase_a = np.exp(1j * a * np.outer(k, k))
        phase_b = np.exp(-1j * a * np.outer(k, k))
        idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
        return cls(n, extent, theta, phase_a, phase_b, idx)

    @classmethod
    def for_field(cls, f: GridField) -> "StarPlan":
        return cls.build(f.size, f.extent, f.theta)

    def matches(self, f: GridField) -> bool:
        return self.size == f.size and self.extent == f.extent and self.theta == f.theta


def star_product(f: GridField, g: GridField, plan: StarPlan | None = None) -> GridField:
    """Twisted convolution of f and g on the grid."""
    if not f.same_grid(g):
        raise ValueError("grid metadata mismatch")
    plan = StarPlan.for_field(f) if plan is None else plan
    if not plan.matches(f):
        raise ValueError("plan does not match the grid")
    if plan.theta == 0:
        return f.with_values(f.values * g.values)
    n = plan.size
    fh = np.fft.fft2(f.values)
    gh = np.fft.fft2(g.values)
    # A[k1, q1, k2] = fh[k1, k2] exp(i a k2 q1); B[k1, q1, m2] = gh[q1 - k1, m2]
    a_part = fh[:, None, :] * plan.phase_a[None, :, :]
    b_part = gh[plan.shift_index]
    conv = np.fft.ifft(np.fft.fft(a_part, axis=2) * np.fft.fft(b_part, axis=2), axis=2)
    result_hat = np.einsum("kqm,km->qm", conv, plan.phase_b)
    # a pointwise product is the spectral convolution divided by N^2
    return f.with_values(np.fft.ifft2(result_hat) / (n * n))


# ---------------------------------------------------------------------------
# checks


def check_tracial(f: GridField, g: GridField, plan: StarPlan | None = None, floor: float = 1e-300) -> float:
    """|int f*g - int f g| / (|int f g| + floor)."""
    lhs = star_product(f, g, plan).integral()
    rhs = f.with_values(f.values * g.values).integral()
    return abs(lhs - rhs) / (abs(rhs) + floor)


def translate(f: GridField, shift) -> GridField:
    """f(x + shift) by a spectral phase (exact for band-limited samples)."""
    k = wavenumbers(f.size, f.extent)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    phase = np.exp(1j * (k1 * shift[0] + k2 * shift[1]))
    return f.with_values(np.fft.ifft2(np.fft.fft2(f.values) * phase))


def plane_wave(k, f: GridField) -> GridField:
    x, y = coordinates(f.size, f.extent)
    return f.with_values(np.exp(1j * (k[0] * x + k[1] * y)))


def theta_matrix(theta: float) -> np.ndarray:
    return theta * np.array([[0.0, 1.0], [-1.0, 0.0]])


def check_shift_identity(f: GridField, p, plan: StarPlan | None = None, interior: float = 0.5) -> float:
    """|| e^{ipx} f - f(. + Theta p / 2) * e^{ip.} || / ||f|| over the central region."""
    p = np.asarray(p, dtype=float)
    wave = plane_wave(p, f)
    shifted = translate(f, theta_matrix(f.theta) @ p / 2)
    rhs = star_product(shifted, wave, plan)
    lhs = f.with_values(wave.values * f.values)
    x, y = coordinates(f.size, f.extent)
    mask = (np.abs(x) <= interior * f.extent / 2) & (np.abs(y) <= interior * f.extent / 2)
    diff = np.sqrt((np.abs(lhs.values - rhs.values)[mask] ** 2).sum())
    ref = np.sqrt((np.abs(f.values)[mask] ** 2).sum())
    return float(diff / ref) if ref else float(diff)


def plane_wave_phase_error(k, kp, n: int = DEFAULT_GRID, extent: float = DEFAULT_EXTENT, theta: float = DEFAULT_THETA) -> float:
    """Relative error of e^{ikx}*e^{ik'x} against e^{-(i/2) k.Theta k'} e^{i(k+k')x}.

    Wave vectors are rounded to the grid lattice first.
    """
    step = 2 * np.pi / extent
    k = np.round(np.asarray(k, dtype=float) / step) * step
    kp = np.round(np.asarray(kp, dtype=float) / step) * step
    base = GridField(np.zeros((n, n), dtype=complex), extent, theta)
    prod = star_product(plane_wave(k, base), plane_wave(kp, base))
    phase = np.exp(-0.5j * k @ theta_matrix(theta) @ kp)
    expected = plane_wave(k + kp, base).values * phase
    return float(np.max(np.abs(prod.values - expected)))


def semiclassical_residual(f: GridField, g: GridField) -> float:
    """|| f*g - f g - (i/2) Theta^{mu nu} d_mu f d_nu g || / ||f g||."""
    k = wavenumbers(f.size, f.extent)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    fh, gh = np.fft.fft2(f.values), np.fft.fft2(g.values)
    d = lambda h, kk: np.fft.ifft2(1j * kk * h)
    poisson = d(fh, k1) * d(gh, k2) - d(fh, k2) * d(gh, k1)
    approx = f.values * g.values + 0.5j * f.theta * poisson
    exact = star_product(f, g).values
    return float(np.linalg.norm(exact - approx) / np.linalg.norm(f.values * g.values))


def semiclassical_exponent(thetas=(0.05, 0.1, 0.2, 0.4), n: int = 64, extent: float = 16.0) -> float:
    """Slope of log(residual) against log(theta) for a Gaussian pair."""
    res = []
    for th in thetas:
        f = gaussian((0.3, -0.2), 1.0, n, extent, th)
        g = gaussian((-0.4, 0.5), 1.3, n, extent, th)
        g = g.with_values(g.values * np.exp(1j * 0.7 * coordinates(n, extent)[0]))
        res.append(semiclassical_residual(f, g))
    slope, _ = np.polyfit(np.log(thetas), np.log(res), 1)
    return float(slope)


def associativity_residual(f: GridField, g: GridField, h: GridField) -> float:
    plan = StarPlan.for_field(f)
    left = star_product(star_product(f, g, plan), h, plan).values
    right = star_product(f, star_product(g, h, plan), plan).values
    return float(np.linalg.norm(left - right) / np.linalg.norm(left))


def conjugation_residual(f: GridField, g: GridField) -> float:
    """|| conj(f*g) - conj(g)*conj(f) ||, normalized."""
    lhs = np.conj(star_product(f, g).values)
    rhs = star_product(g.with_values(np.conj(g.values)), f.with_values(np.conj(f.values))).values
    return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs))


def coordinate_commutator_residual(
    width: float = 6.0, n: int = DEFAULT_GRID, extent: float = 48.0, theta: float = DEFAULT_THETA, core: float = 0.08
) -> float:
    """(x1 G)*(x3 G) - (x3 G)*(x1 G) against i theta G*G near the centre of a wide Gaussian G.

    Away from the centre the window's own gradients enter at relative
    order r^2 / width^2, so the comparison is restricted to |x| <= core * width.
    """
    gw = gaussian((0.0, 0.0), width, n, extent, theta)
    x, y = coordinates(n, extent)
    xg, yg = gw.with_values(x * gw.values), gw.with_values(y * gw.values)
    plan = StarPlan.for_field(gw)
    comm = star_product(xg, yg, plan).values - star_product(yg, xg, plan).values
    ref = 1j * theta * star_product(gw, gw, plan).values
    mask = (np.abs(x) <= core * width) & (np.abs(y) <= core * width)
    return float(np.linalg.norm((comm - ref)[mask]) / np.linalg.norm(ref[mask]))


def noncompact_trace_demo(p: float) -> tuple:
    """(quadrature of exp(-x^2 e^{-p^2} - p^2/4) over x, closed form sqrt(pi) e^{p^2/4})."""
    scale = np.exp(-p * p)
    value, _ = integrate.quad(lambda x: np.exp(-x * x * scale - p * p / 4), -np.inf, np.inf, epsabs=0, epsrel=1e-12, limit=200)
    return float(value), float(np.sqrt(np.pi) * np.exp(p * p / 4))


def star_product_4d(f_planes: tuple, g_planes: tuple) -> tuple:
    """Star product of factorized fields f1(x1,x3) f2(x2,x4): plane by plane."""
    return tuple(star_product(a, b) for a, b in zip(f_planes, g_planes))


# ---------------------------------------------------------------------------
# binary layout: one JSON header line, then row-major complex64 samples


def save_grid(f: GridField, path) -> None:
    header = json.dumps({"N": f.size, "L": f.extent, "theta": f.theta}, sort_keys=True).encode() + b"\n"
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(f.values, dtype=np.complex64).tobytes())


def load_grid(path) -> GridField:
    data = Path(path).read_bytes()
    head, _, body = data.partition(b"\n")
    meta = json.loads(head)
    n = int(meta["N"])
    values = np.frombuffer(body, dtype=np.complex64)
    if values.size != n * n:
        raise ValueError(f"expected {n * n} samples, found {values.size}")
    return GridField(values.reshape(n, n).astype(complex), float(meta["L"]), float(meta["theta"]))


@dataclass
class MoyalCheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool


def run_moyal_suite(
    n: int = DEFAULT_GRID, extent: float = DEFAULT_EXTENT, theta: float = DEFAULT_THETA, tol: float = 1e-6
) -> list:
    """The numeric checks with their tolerances."""
    f = gaussian((0.4, -0.3), 1.0, n, extent, theta)
    g = gaussian((-0.5, 0.2), 1.2, n, extent, theta)
    g = g.with_values(g.values * np.exp(0.8j * coordinates(n, extent)[1]))
    h = gaussian((0.1, 0.6), 0.9, n, extent, theta)
    plan = StarPlan.for_field(f)
    out = []

    def add(name, value, limit, above=False):
        out.append(MoyalCheckResult(name, float(value), limit, value >= limit if above else value < limit))

    add("tracial", check_tracial(f, g, plan), tol)
    add("tracial_self", check_tracial(f, f, plan), tol)
    add("shift_identity", check_shift_identity(f, (0.7, -0.4), plan), tol)
    add("plane_wave_phase", plane_wave_phase_error((1.2, -0.8), (0.5, 1.9), n, extent, theta), tol)
    add("associativity", associativity_residual(f, g, h), tol)
    add("conjugation", conjugation_residual(f, g), 1e-10)
    add("semiclassical_exponent", semiclassical_exponent(), 1.9, above=True)
    add("coordinate_commutator", coordinate_commutator_residual(theta=theta), 1e-2)
    for p in (0.0, 1.0, 2.0):
        value, closed = noncompact_trace_demo(p)
        add(f"noncompact_trace_p{p:g}", abs(value - closed) / closed, 1e-8)
    return out
