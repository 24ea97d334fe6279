"""Patch-based image denoising over a learned dictionary.

Pipeline: slide p x p patches over the noisy image, subtract each patch's
mean, train an overcomplete dictionary (DCT-seeded, K-SVD refined) with an
error-constrained sparse coder, then blend the coded patches back with the
closed-form weighted average that balances patch reconstructions against
the noisy pixels.

Images are plain 2-D float arrays in [0, 255]; binary 8-bit PGM is the
interchange format.
"""

from dataclasses import dataclass

import numpy as np

from .dictlearn import _ksvd_sweeps
from .greedy import batch_omp


def as_image(img) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise ValueError("image must be a 2-D array")
    if not np.all(np.isfinite(img)):
        raise ValueError("image pixels must be finite")
    return img


def read_pgm(path) -> np.ndarray:
    """Binary (P5) 8-bit PGM reader."""
    with open(path, "rb") as fh:
        return pgm_from_bytes(fh.read())


def pgm_from_bytes(data: bytes) -> np.ndarray:
    if not data.startswith(b"P5"):
        raise ValueError("only binary P5 PGM images are supported")
    # header tokens may be separated by whitespace and '#' comment lines
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    width, height, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise ValueError("only 8-bit PGM images are supported")
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    return pixels.reshape(height, width).astype(float)


def pgm_to_bytes(img) -> bytes:
    img = as_image(img)
    clipped = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    h, w = clipped.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + clipped.tobytes()


def write_pgm(path, img):
    with open(path, "wb") as fh:
        fh.write(pgm_to_bytes(img))


def psnr(reference, img) -> float:
    reference = as_image(reference)
    img = as_image(img)
    mse = float(np.mean((reference - img) ** 2))
    if mse == 0:
        return float("inf")
    return 10.0 * np.log10(255.0**2 / mse)


def _patch_positions(extent, p, stride):
    pos = list(range(0, extent - p + 1, stride))
    if pos[-1] != extent - p:  # tail patch keeps every pixel covered
        pos.append(extent - p)
    return pos


@dataclass(frozen=True)
class PatchGrid:
    patch_size: int
    stride: int
    patches: np.ndarray  # p^2 x M, one vectorized patch per column
    locations: tuple     # (row, col) of each patch's top-left corner
    shape: tuple         # source image shape


def extract_patches(img, p: int, stride: int = 1) -> PatchGrid:
    img = as_image(img)
    h, w = img.shape
    if p > min(h, w):
        raise ValueError("patch size exceeds the image")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    rows = _patch_positions(h, p, stride)
    cols = _patch_positions(w, p, stride)
    locations = [(r, c) for r in rows for c in cols]
    patches = np.empty((p * p, len(locations)))
    for j, (r, c) in enumerate(locations):
        patches[:, j] = img[r:r + p, c:c + p].reshape(-1)
    return PatchGrid(patch_size=p, stride=stride, patches=patches,
                     locations=tuple(locations), shape=(h, w))


def aggregate_patches(grid: PatchGrid, patches, delta: float = 0.0,
                      anchor=None) -> np.ndarray:
    """Weighted patch blending: (sum coverage + delta)^-1 (sum recon + delta*anchor).

    The coverage operator is diagonal (per-pixel patch counts), so the
    closed form reduces to a pixelwise weighted average. With delta = 0 this
    is plain averaging of the overlapping reconstructions.
    """
    p = grid.patch_size
    num = np.zeros(grid.shape)
    den = np.zeros(grid.shape)
    for j, (r, c) in enumerate(grid.locations):
        num[r:r + p, c:c + p] += patches[:, j].reshape(p, p)
        den[r:r + p, c:c + p] += 1.0
    if delta > 0:
        if anchor is None:
            raise ValueError("delta > 0 needs the anchor image")
        num += delta * as_image(anchor)
        den += delta
    if np.any(den == 0):
        raise ValueError("aggregation found uncovered pixels")
    return num / den


def overcomplete_dct_dictionary(p: int, num_atoms: int) -> np.ndarray:
    """Separable overcomplete DCT: kron of a 1-D p x sqrt(num_atoms) frame."""
    side = int(round(np.sqrt(num_atoms)))
    if side * side != num_atoms:
        raise ValueError("num_atoms must be a perfect square")
    base = np.zeros((p, side))
    t = np.arange(p)
    for k in range(side):
        v = np.cos(np.pi * k * t / side)
        if k > 0:
            v = v - v.mean()
        base[:, k] = v / np.linalg.norm(v)
    d = np.kron(base, base)
    return d / np.linalg.norm(d, axis=0)


@dataclass(frozen=True)
class DenoiseSettings:
    sigma: float
    patch: int = 8
    stride: int = 1
    num_atoms: int = 256
    sweeps: int = 10
    gain: float = 1.15       # per-patch residual budget is gain * sigma * patch
    delta: float | None = None  # fidelity weight; defaults to 30 / sigma
    max_atoms_per_patch: int | None = None

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("noise level sigma must be positive")


def denoise_image(noisy, settings: DenoiseSettings) -> np.ndarray:
    """DCT-initialized dictionary, K-SVD sweeps with error-constrained coding
    on the zero-mean patches, then the weighted aggregation."""
    noisy = as_image(noisy)
    p = settings.patch
    grid = extract_patches(noisy, p, settings.stride)
    means = grid.patches.mean(axis=0)
    centered = grid.patches - means
    eps = settings.gain * settings.sigma * p
    k_cap = settings.max_atoms_per_patch or p * p
    atoms = overcomplete_dct_dictionary(p, settings.num_atoms)
    coder = lambda d: batch_omp(d, centered, k_cap, eps=eps)
    atoms, _codes, _trace = _ksvd_sweeps(centered, atoms,
                                         sparsity_k=k_cap,
                                         sweeps=max(settings.sweeps, 1),
                                         coder=coder)
    # final coding pass: every patch meets the error stop with the trained atoms
    codes = coder(atoms)
    recon = atoms @ codes + means
    delta = settings.delta if settings.delta is not None else 30.0 / settings.sigma
    out = aggregate_patches(grid, recon, delta=delta, anchor=noisy)
    return np.clip(out, 0.0, 255.0)
