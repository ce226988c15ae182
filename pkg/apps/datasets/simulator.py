"""
Synthetic ICF-style forward simulator.

Maps a parameter vector x in [0, 1]^5 to a four-band image and fifteen
scalar diagnostics. Parameters 1, 2 and 4 shape the observables
(blob radius, intensity, ellipticity and rotation). Parameters 0 and 3
enter only through perturbations of amplitude ``DEAD_AMPLITUDE``, an order
of magnitude below the observation noise, so they are unidentifiable by
construction.
"""
import numpy as np

from apps.core.exceptions import ParameterError

SIMULATOR_VERSION = 'synthetic-icf/1.0'
N_PARAMS = 5
N_SCALARS = 15
N_BANDS = 4

BAND_WEIGHTS = (1.0, 0.7, 0.45, 0.25)
BAND_SHRINK = (1.0, 0.85, 0.7, 0.55)
BLOB_CENTERS = ((-0.35, -0.1), (0.3, 0.2))
BLOB_WEIGHTS = (1.0, 0.6)

NOISE_SIGMA = 1e-2
DEAD_AMPLITUDE = 1e-3

MIN_SIZE = 8
MAX_SIZE = 64


def check_size(size: int) -> int:
    """
    Validate an image side length.

    Raises:
        ParameterError: Unless ``size`` is a power of two in [8, 64].
    """
    if size < MIN_SIZE or size > MAX_SIZE or size & (size - 1):
        raise ParameterError(f'image size must be a power of two in [{MIN_SIZE}, {MAX_SIZE}], got {size}')
    return size


def check_parameters(x: np.ndarray) -> np.ndarray:
    """
    Validate one parameter vector.

    Raises:
        ParameterError: If ``x`` is not a finite 5-vector inside the unit cube.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (N_PARAMS,):
        raise ParameterError(f'expected {N_PARAMS} parameters, got shape {x.shape}')
    if not np.isfinite(x).all() or (x < 0.0).any() or (x > 1.0).any():
        raise ParameterError(f'parameters must lie in the unit cube, got {x.tolist()}')
    return x


def _grid(size: int) -> tuple[np.ndarray, np.ndarray]:
    coords = (np.arange(size) + 0.5) / size * 2.0 - 1.0
    return np.meshgrid(coords, coords, indexing='ij')


def _scalars(radius: float, intensity: float, shape: float) -> np.ndarray:
    a, b, c = radius, intensity, shape
    return np.array([
        1.0 - np.exp(-2.0 * a),
        b ** 1.5,
        a * b,
        1.0 - np.exp(-3.0 * c),
        (1.0 + a) ** 2 / 4.0,
        b * (1.0 - 0.3 * c),
        np.tanh(2.0 * c - 1.0),
        a * c,
        np.exp(-a) * b,
        (b + c) ** 2 / 4.0,
        np.sqrt(0.1 + a),
        1.0 / (1.0 + np.exp(-4.0 * (b - 0.5))),
        a * a + 0.5 * c,
        b * c * c,
        1.0 - np.exp(-(a + b + c)),
    ])


def clean_observables(
    x: np.ndarray,
    size: int = 16,
    dead_amplitude: float = DEAD_AMPLITUDE,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Evaluate the noise-free forward map.

    Args:
        x: Parameters in [0, 1]^5.
        size: Image side length.
        dead_amplitude: Scale of the perturbations driven by x0 and x3.

    Returns:
        ``(image (size, size, 4), scalars (15,))``.
    """
    x = check_parameters(x)
    check_size(size)
    x0, x1, x2, x3, x4 = x
    yy, xx = _grid(size)

    radius = 0.18 + 0.22 * x1
    intensity = 0.4 + 1.2 * x2
    aspect = np.sqrt(1.0 + 1.2 * x4)
    angle = np.pi / 3.0 * x4
    cos, sin = np.cos(angle), np.sin(angle)
    dead = (x0 - 0.5, x3 - 0.5)

    image = np.zeros((size, size, N_BANDS))
    for (cy, cx), blob_weight, dead_shift in zip(BLOB_CENTERS, BLOB_WEIGHTS, dead):
        dy, dx = yy - cy, xx - cx
        u = cos * dx + sin * dy
        v = -sin * dx + cos * dy
        for band, (band_weight, shrink) in enumerate(zip(BAND_WEIGHTS, BAND_SHRINK)):
            r = radius * shrink
            blob = np.exp(-0.5 * ((u / (r * aspect)) ** 2 + (v * aspect / r) ** 2))
            image[..., band] += intensity * band_weight * blob_weight * blob
            image[..., band] += dead_amplitude * dead_shift * blob

    scalars = _scalars(x1, x2, x4)
    phases = np.arange(N_SCALARS)
    scalars = scalars + dead_amplitude * (dead[0] * np.cos(phases) + dead[1] * np.sin(phases))
    return image, scalars


def synth_forward(
    x: np.ndarray,
    noise_seed: int,
    size: int = 16,
    noise_sigma: float = NOISE_SIGMA,
    dead_amplitude: float = DEAD_AMPLITUDE,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Evaluate the forward map with Gaussian observation noise.

    Deterministic given ``(x, noise_seed, size)``. The image is clipped at 0
    after the noise is added.

    Returns:
        ``(image (size, size, 4), scalars (15,))``.
    """
    image, scalars = clean_observables(x, size, dead_amplitude)
    rng = np.random.default_rng(noise_seed)
    image = np.maximum(image + rng.normal(0.0, noise_sigma, image.shape), 0.0)
    scalars = scalars + rng.normal(0.0, noise_sigma, scalars.shape)
    return image, scalars


def sample_noise_seed(seed: int, index: int) -> int:
    """Derive the per-sample noise seed from the dataset seed and sample index."""
    sequence = np.random.SeedSequence(seed, spawn_key=(index,))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])
