"""Periodic grids on the flat torus and spectral field calculus.

Fields are plain numpy arrays sampled at cell centers of ``[0, 2*pi)^N``:
scalars have shape ``grid.sizes``, vectors ``(N, *sizes)`` and tensors
``(N, N, *sizes)`` with the convention ``tensor[i, j] = d(v_i)/d(x_j)``.
Differentiation is exact for resolved Fourier modes; quadratic and cubic
nonlinearities are handled with the 2/3-rule mask exposed by ``dealias``.
"""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi

#: tolerance used when a zero-mean precondition is enforced
MEAN_TOL = 1e-12


class FieldError(ValueError):
    """Raised when a field violates a grid contract (shape, finiteness, mean)."""


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


class Grid:
    """Uniform periodic grid on the N-dimensional flat torus.

    Parameters
    ----------
    sizes : tuple of int
        Cells per dimension; each a power of two, at least 8.  One to three
        dimensions are accepted (3-D only at toy sizes).
    """

    def __init__(self, sizes):
        sizes = tuple(int(n) for n in np.atleast_1d(sizes))
        if not 1 <= len(sizes) <= 3:
            raise FieldError(f"grid dimension must be 1, 2 or 3, got {len(sizes)}")
        for n in sizes:
            if n < 8 or not _is_power_of_two(n):
                raise FieldError(f"grid sizes must be powers of two >= 8, got {sizes}")
        self.sizes = sizes
        self._spec = self._build_spectral()

    def __repr__(self) -> str:
        return f"Grid(sizes={self.sizes})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Grid) and other.sizes == self.sizes

    def __hash__(self) -> int:
        return hash(self.sizes)

    @property
    def dim(self) -> int:
        return len(self.sizes)

    @property
    def cell_volume(self) -> float:
        return TWO_PI ** self.dim / float(np.prod(self.sizes))

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(TWO_PI / n for n in self.sizes)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.sizes))

    def _build_spectral(self) -> dict:
        dim = len(self.sizes)
        # integer wavenumbers; rfft layout on the last axis
        axes_k = []
        for ax, n in enumerate(self.sizes):
            if ax == dim - 1:
                k = np.arange(n // 2 + 1, dtype=np.float64)
            else:
                k = np.fft.fftfreq(n, d=1.0 / n)
            shape = [1] * dim
            shape[ax] = k.size
            axes_k.append(k.reshape(shape))
        k2 = sum(k * k for k in axes_k)
        inv_k2 = np.zeros_like(k2)
        nz = k2 > 0
        inv_k2[nz] = 1.0 / k2[nz]
        # odd derivatives drop the (unpaired) Nyquist mode for real symmetry
        ik = []
        k_odd = []
        for ax, n in enumerate(self.sizes):
            k = axes_k[ax].copy()
            k[np.abs(k) == n // 2] = 0.0
            k_odd.append(k)
            ik.append(1j * k)
        # the projection must invert the same (Nyquist-zeroed) symbol that
        # grad/div use, or mixed-Nyquist modes survive with nonzero div
        k2p = sum(k * k for k in k_odd)
        inv_k2p = np.zeros_like(k2p)
        nzp = k2p > 0
        inv_k2p[nzp] = 1.0 / k2p[nzp]
        # 2/3-rule mask for products formed in physical space
        mask = np.ones(k2.shape, dtype=bool)
        for ax, n in enumerate(self.sizes):
            cut = (2.0 / 3.0) * (n // 2)
            mask &= np.abs(axes_k[ax]) <= cut
        return {"k": axes_k, "k2": k2, "inv_k2": inv_k2, "ik": ik,
                "inv_k2p": inv_k2p, "dealias": mask}

    # -- coordinates -------------------------------------------------------

    def coordinates(self) -> list[np.ndarray]:
        """Cell-center coordinate arrays, broadcastable to a scalar field."""
        xs = [np.arange(n) * (TWO_PI / n) for n in self.sizes]
        return list(np.meshgrid(*xs, indexing="ij", sparse=False))

    # -- validation --------------------------------------------------------

    def check_scalar(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=np.float64)
        if f.shape != self.sizes:
            raise FieldError(f"scalar shape {f.shape} != grid {self.sizes}")
        if not np.all(np.isfinite(f)):
            raise FieldError("scalar field has non-finite entries")
        return f

    def check_vector(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.dim, *self.sizes):
            raise FieldError(f"vector shape {v.shape} != {(self.dim, *self.sizes)}")
        if not np.all(np.isfinite(v)):
            raise FieldError("vector field has non-finite entries")
        return v

    # -- transforms --------------------------------------------------------

    def fwd(self, f: np.ndarray) -> np.ndarray:
        return np.fft.rfftn(f)

    def bwd(self, fh: np.ndarray) -> np.ndarray:
        return np.fft.irfftn(fh, s=self.sizes, axes=tuple(range(self.dim)))

    # -- calculus ----------------------------------------------------------

    def gradient(self, f: np.ndarray) -> np.ndarray:
        """Spectral gradient of a scalar field, shape (N, *sizes)."""
        f = self.check_scalar(f)
        fh = self.fwd(f)
        out = np.empty((self.dim, *self.sizes))
        for ax in range(self.dim):
            out[ax] = self.bwd(self._spec["ik"][ax] * fh)
        return out

    def divergence(self, v: np.ndarray) -> np.ndarray:
        v = self.check_vector(v)
        dh = np.zeros(self._spec["k2"].shape, dtype=complex)
        for ax in range(self.dim):
            dh += self._spec["ik"][ax] * self.fwd(v[ax])
        return self.bwd(dh)

    def gradient_vector(self, v: np.ndarray) -> np.ndarray:
        """Velocity-gradient tensor, ``out[i, j] = d(v_i)/d(x_j)``."""
        v = self.check_vector(v)
        out = np.empty((self.dim, self.dim, *self.sizes))
        for i in range(self.dim):
            vh = self.fwd(v[i])
            for j in range(self.dim):
                out[i, j] = self.bwd(self._spec["ik"][j] * vh)
        return out

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        f = self.check_scalar(f)
        return self.bwd(-self._spec["k2"] * self.fwd(f))

    def inverse_laplacian(self, f: np.ndarray, mean_tol: float = MEAN_TOL):
        """Zero-mean solution of ``lap(result) = f``.

        The input mean is subtracted before inversion; a mean exceeding
        ``mean_tol`` (relative to the field scale) is reported in the second
        return slot so callers can surface an ill-posed right-hand side.
        """
        f = self.check_scalar(f)
        mean = float(np.mean(f))
        scale = max(1.0, float(np.max(np.abs(f))))
        fh = self.fwd(f)
        fh.flat[0] = 0.0
        out = self.bwd(-self._spec["inv_k2"] * fh)
        return out, abs(mean) > mean_tol * scale

    def helmholtz_project(self, v: np.ndarray) -> np.ndarray:
        """Leray/Helmholtz projection ``v - grad(invlap(div v))``."""
        v = self.check_vector(v)
        vh = [self.fwd(v[ax]) for ax in range(self.dim)]
        dh = sum(self._spec["ik"][ax] * vh[ax] for ax in range(self.dim))
        phi = -self._spec["inv_k2p"] * dh  # = (invlap div v)^, matching symbols
        out = np.empty_like(v)
        for ax in range(self.dim):
            out[ax] = self.bwd(vh[ax] - self._spec["ik"][ax] * phi)
        return out

    def div_tensor(self, F: np.ndarray, dealias: bool = False) -> np.ndarray:
        """Row-wise tensor divergence ``out_i = sum_j d(F_ij)/d(x_j)``.

        With ``dealias=True`` the 2/3 mask is applied in the same spectral
        pass, for tensors assembled from pointwise products.
        """
        mask = self._spec["dealias"]
        out = np.empty((self.dim, *self.sizes))
        for i in range(self.dim):
            acc = np.zeros(self._spec["k2"].shape, dtype=complex)
            for j in range(self.dim):
                fh = self.fwd(F[i, j])
                if dealias:
                    fh = np.where(mask, fh, 0.0)
                acc += self._spec["ik"][j] * fh
            out[i] = self.bwd(acc)
        return out

    def viscous_operator(self, u: np.ndarray, nu: float, eta: float) -> np.ndarray:
        """Constant-coefficient viscous drift ``nu lap(u) + eta grad(div u)``."""
        uh = [self.fwd(u[ax]) for ax in range(self.dim)]
        dh = sum(self._spec["ik"][ax] * uh[ax] for ax in range(self.dim))
        out = np.empty_like(u)
        for ax in range(self.dim):
            out[ax] = self.bwd(-nu * self._spec["k2"] * uh[ax]
                               + eta * self._spec["ik"][ax] * dh)
        return out

    def integrate(self, f: np.ndarray) -> float:
        """Cell-volume weighted sum over the torus."""
        return float(np.sum(f) * self.cell_volume)

    def mean(self, f: np.ndarray) -> float:
        return float(np.mean(f))

    def dealias(self, f: np.ndarray) -> np.ndarray:
        """Apply the 2/3-rule mask to a scalar field."""
        return self.bwd(np.where(self._spec["dealias"], self.fwd(f), 0.0))

    def dealias_vector(self, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        for ax in range(v.shape[0]):
            out[ax] = self.dealias(v[ax])
        return out

    def modal_norm_sq(self, f: np.ndarray) -> float:
        """Squared L2 norm computed from Fourier coefficients (Parseval)."""
        fh = self.fwd(f)
        n_last = self.sizes[-1]
        w = np.full(fh.shape[-1], 2.0)
        w[0] = 1.0
        if n_last % 2 == 0:
            w[-1] = 1.0
        total = np.sum(w * np.abs(fh) ** 2)
        return float(total) * self.cell_volume / self.n_cells

    # -- inter-grid transfer ------------------------------------------------

    def restrict(self, f: np.ndarray, coarse: "Grid") -> np.ndarray:
        """Spectral truncation of a scalar field onto a coarser grid.

        Exact for modes resolved on the coarse grid; content at or above the
        coarse Nyquist is dropped.
        """
        if coarse.dim != self.dim:
            raise FieldError("restrict: dimension mismatch")
        if coarse.sizes == self.sizes:
            return np.array(f, dtype=np.float64)
        for nc, nf in zip(coarse.sizes, self.sizes):
            if nc > nf:
                raise FieldError("restrict: target grid must be coarser")
        fh = np.fft.fftn(self.check_scalar(f))
        idx = []
        for nc, nf in zip(coarse.sizes, self.sizes):
            half = nc // 2
            idx.append(np.r_[0:half, nf - half : nf])
        sub = fh[np.ix_(*idx)]
        scale = coarse.n_cells / self.n_cells
        out = np.fft.ifftn(sub * scale).real
        return out

    def restrict_vector(self, v: np.ndarray, coarse: "Grid") -> np.ndarray:
        return np.stack([self.restrict(v[ax], coarse) for ax in range(v.shape[0])])


# -- random smooth fields (shared by tests and the verify suite) ------------


def random_smooth_scalar(grid: Grid, rng: np.random.Generator, kmax: int = 4,
                         amplitude: float = 1.0) -> np.ndarray:
    """Random band-limited scalar field with modes up to ``kmax``."""
    white = rng.standard_normal(grid.sizes)
    fh = grid.fwd(white)
    k2 = grid._spec["k2"]
    fh *= np.exp(-k2 / max(kmax, 1) ** 2)
    f = grid.bwd(fh)
    peak = np.max(np.abs(f))
    return f * (amplitude / peak if peak > 0 else 1.0)


def random_smooth_vector(grid: Grid, rng: np.random.Generator, kmax: int = 4,
                         amplitude: float = 1.0) -> np.ndarray:
    return np.stack(
        [random_smooth_scalar(grid, rng, kmax, amplitude) for _ in range(grid.dim)]
    )


def random_solenoidal(grid: Grid, rng: np.random.Generator, kmax: int = 4,
                      amplitude: float = 1.0) -> np.ndarray:
    """Random divergence-free vector field."""
    return grid.helmholtz_project(random_smooth_vector(grid, rng, kmax, amplitude))


def grad_inf_norm(grid: Grid, v: np.ndarray) -> float:
    """Max absolute entry of the velocity-gradient tensor."""
    return float(np.max(np.abs(grid.gradient_vector(v))))
