"""Physical model of the amplitude-only 4f correlator.

The bench is: DMD1 (object plane) -> lens 1 -> DMD2 (Fourier plane) ->
lens 2 -> camera. Every stage is a plain array operation:

1. :func:`dmd_modulate` rasterises each micromirror onto a
   ``subpixel_factor``-times finer grid (mirror footprint, inter-mirror gap,
   central hinge hole, finite ON/OFF contrast, bit-depth quantisation).
2. :func:`tilt_phase` applies the linear phase of the tilted, rotated array.
3. Lens 1 Fourier-transforms the field; :func:`lens_transfer` applies the
   circular aperture and the Seidel wavefront error.
4. DMD2 multiplies the spectrum pixel-for-bin (one DMD2 pixel per DFT bin
   of the DMD1 pixel grid); bins outside DMD2 are lost.
5. Lens 2 transforms again (which flips the image), the camera squares the
   field, integrates each super-pixel and quantises.

All lengths are metres and all angles radians.
"""
import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy import ndimage

from .field_math import (CENTER, CORNER, ComplexField, expand_pixels, fft2o,
                         intensity, superpixel_reduce)

DEFAULT_REFRESH = {1: 20000.0, 2: 1031.0, 8: 1031.0}


def _require(cond, name, message):
    if not cond:
        raise ValueError(f"{name}: {message}")


@dataclass(frozen=True)
class DmdSpec:
    rows: int = 1080
    cols: int = 1920
    pixel_pitch: float = 17e-6
    mirror_size: float = 16e-6
    hole_diameter: float = 1e-6
    tilt_angle: float = math.radians(22.5)
    inplane_rotation: float = math.radians(45.0)
    bit_depth: int = 8
    contrast_ratio: float = 2000.0
    refresh_rate: float = None
    subpixel_factor: int = 17

    def __post_init__(self):
        if self.refresh_rate is None:
            object.__setattr__(self, "refresh_rate", DEFAULT_REFRESH.get(self.bit_depth, 1031.0))
        _require(self.rows >= 1 and self.cols >= 1, "rows/cols", "must be >= 1")
        _require(self.pixel_pitch > 0, "pixel_pitch", "must be > 0")
        _require(0 < self.fill_factor <= 1, "mirror_size", "fill factor must lie in (0, 1]")
        _require(0 <= self.hole_radius_norm < self.fill_factor / 2, "hole_diameter",
                 "hole radius must be smaller than half the mirror")
        _require(0 <= self.tilt_angle < math.pi / 2, "tilt_angle", "must lie in [0, pi/2)")
        _require(math.isfinite(self.inplane_rotation), "inplane_rotation", "must be finite")
        _require(self.bit_depth in (1, 2, 8), "bit_depth", "must be 1, 2 or 8")
        _require(self.contrast_ratio >= 1, "contrast_ratio", "must be >= 1")
        _require(self.refresh_rate > 0, "refresh_rate", "must be > 0")
        _require(int(self.subpixel_factor) == self.subpixel_factor and self.subpixel_factor >= 1,
                 "subpixel_factor", "must be a positive integer")

    @property
    def fill_factor(self):
        return self.mirror_size / self.pixel_pitch

    @property
    def hole_radius_norm(self):
        return 0.5 * self.hole_diameter / self.pixel_pitch

    @property
    def off_level(self):
        return 0.0 if math.isinf(self.contrast_ratio) else 1.0 / self.contrast_ratio


@dataclass(frozen=True)
class SeidelCoefficients:
    """Wavefront coefficients in waves: defocus, spherical, coma,
    astigmatism, field curvature and distortion."""
    w_d: float = 0.0
    w040: float = 0.0
    w131: float = 0.0
    w222: float = 0.0
    w220: float = 0.0
    w311: float = 0.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            _require(math.isfinite(getattr(self, f.name)), f.name, "must be finite")


NOMINAL_SEIDEL = SeidelCoefficients(w040=0.1, w131=0.05)


@dataclass(frozen=True)
class LensSpec:
    focal_length: float = 0.2
    pupil_radius: float = 12.7e-3
    seidel: SeidelCoefficients = field(default_factory=SeidelCoefficients)
    image_height: float = 0.0

    def __post_init__(self):
        _require(self.focal_length > 0, "focal_length", "must be > 0")
        _require(self.pupil_radius > 0, "pupil_radius", "must be > 0")
        _require(math.isfinite(self.image_height), "image_height", "must be finite")


@dataclass(frozen=True)
class CameraSpec:
    """Detector model.

    ``exposure`` multiplies the incoming intensity before detection; ``None``
    selects auto-exposure, i.e. the frame's own noiseless peak maps to 1 so
    that ``saturation_level`` is a fraction of the peak intensity.
    """
    rows: int = 1080
    cols: int = 1920
    bit_depth: int = 8
    frame_rate: float = 1000.0
    saturation_level: float = 1.0
    noise_sigma: float = 0.0
    exposure: float = 1.0

    def __post_init__(self):
        _require(self.rows >= 1 and self.cols >= 1, "rows/cols", "must be >= 1")
        _require(1 <= self.bit_depth <= 16, "bit_depth", "must lie in [1, 16]")
        _require(self.frame_rate > 0, "frame_rate", "must be > 0")
        _require(self.saturation_level > 0, "saturation_level", "must be > 0")
        _require(self.noise_sigma >= 0, "noise_sigma", "must be >= 0")
        _require(self.exposure is None or self.exposure > 0, "exposure", "must be > 0 or null")


@dataclass(frozen=True)
class PerturbationSpec:
    """Deviations of a real bench from the nominal model.

    ``mask_shift`` is ``(d_row, d_col)`` in DMD2 pixels, ``rotation_error``
    in radians, ``illumination_nonuniformity`` the peak-to-peak depth of a
    smooth gain dip centred at ``illumination_center`` (normalised
    coordinates in [-1, 1]). The camera overrides replace the nominal camera
    noise and saturation when set.
    """
    mask_shift: tuple = (0.0, 0.0)
    rotation_error: float = 0.0
    illumination_nonuniformity: float = 0.0
    illumination_center: tuple = (0.0, 0.0)
    camera_noise_sigma: float = None
    camera_saturation: float = None

    def __post_init__(self):
        object.__setattr__(self, "mask_shift", tuple(float(v) for v in self.mask_shift))
        object.__setattr__(self, "illumination_center",
                           tuple(float(v) for v in self.illumination_center))
        _require(len(self.mask_shift) == 2 and all(map(math.isfinite, self.mask_shift)),
                 "mask_shift", "must be two finite numbers")
        _require(math.isfinite(self.rotation_error), "rotation_error", "must be finite")
        _require(0 <= self.illumination_nonuniformity < 1, "illumination_nonuniformity",
                 "must lie in [0, 1)")
        _require(self.camera_noise_sigma is None or self.camera_noise_sigma >= 0,
                 "camera_noise_sigma", "must be >= 0")
        _require(self.camera_saturation is None or self.camera_saturation > 0,
                 "camera_saturation", "must be > 0")

    @property
    def is_nominal(self):
        return self == PerturbationSpec()


@dataclass(frozen=True)
class SystemConfig:
    wavelength: float = 633e-9
    dmd1: DmdSpec = field(default_factory=DmdSpec)
    dmd2: DmdSpec = field(default_factory=DmdSpec)
    lens1: LensSpec = field(default_factory=LensSpec)
    lens2: LensSpec = field(default_factory=LensSpec)
    camera: CameraSpec = field(default_factory=CameraSpec)
    perturbations: PerturbationSpec = field(default_factory=PerturbationSpec)

    def __post_init__(self):
        _require(self.wavelength > 0, "wavelength", "must be > 0")

    def effective_camera(self):
        p = self.perturbations
        cam = self.camera
        if p.camera_noise_sigma is not None:
            cam = dataclasses.replace(cam, noise_sigma=p.camera_noise_sigma)
        if p.camera_saturation is not None:
            cam = dataclasses.replace(cam, saturation_level=p.camera_saturation)
        return cam


def nominal_config(subpixel_factor=17, **overrides):
    """Default bench with the documented nominal aberration preset."""
    lens = LensSpec(seidel=NOMINAL_SEIDEL)
    dmd = DmdSpec(subpixel_factor=subpixel_factor)
    kw = dict(dmd1=dmd, dmd2=dmd, lens1=lens, lens2=lens)
    kw.update(overrides)
    return SystemConfig(**kw)


def ideal_config(subpixel_factor=1, rows=1080, cols=1920):
    """Degenerate bench: no tilt, no aberration, unit fill, no hole,
    infinite contrast, unbounded pupil. Its output equals the ideal
    Fourier-plane product (camera effects aside)."""
    dmd = DmdSpec(rows=rows, cols=cols, mirror_size=17e-6, hole_diameter=0.0, tilt_angle=0.0,
                  contrast_ratio=math.inf, subpixel_factor=subpixel_factor)
    lens = LensSpec(pupil_radius=1e6)
    return SystemConfig(dmd1=dmd, dmd2=dmd, lens1=lens, lens2=lens,
                        camera=CameraSpec(rows=rows, cols=cols, bit_depth=16))


# --------------------------------------------------------------------------
# DMD
# --------------------------------------------------------------------------

def quantize_levels(values, bit_depth):
    levels = 2 ** int(bit_depth) - 1
    return np.floor(np.asarray(values) * levels + 0.5) / levels


def unit_cell(spec):
    """Reflective coverage (0..1) of each subpixel inside one DMD pixel.

    The mirror covers the first ``fill_factor * s`` subpixels per axis; the
    inter-mirror gap trails it. The hinge hole removes the subpixels whose
    centres lie within ``hole_radius_norm * s`` of the pixel centre; a hole
    too small to resolve instead removes its area from the central
    subpixel(s).
    """
    s = int(spec.subpixel_factor)
    cov = np.clip(spec.fill_factor * s - np.arange(s), 0.0, 1.0)
    cell = np.outer(cov, cov)
    radius = spec.hole_radius_norm * s
    if radius > 0:
        centers = np.arange(s) + 0.5
        dist = np.hypot(*np.meshgrid(centers - s / 2, centers - s / 2, indexing="ij"))
        if radius >= 0.5:
            cell[dist <= radius + 1e-12] = 0.0
        else:
            nearest = np.isclose(dist, dist.min())
            cell[nearest] = np.clip(cell[nearest] - math.pi * radius ** 2 / nearest.sum(), 0, None)
    return cell


def dmd_modulate(pattern, spec):
    """Render a [0, 1] pattern as the complex field reflected by the DMD.

    Returns a ``dc_at_corner`` field ``subpixel_factor`` times finer than the
    pattern. Leading batch axes are kept.
    """
    pattern = np.asarray(pattern, dtype=np.float64)
    if np.any(pattern < 0) or np.any(pattern > 1) or not np.all(np.isfinite(pattern)):
        raise ValueError("DMD patterns must lie in [0, 1]")
    rows, cols = pattern.shape[-2:]
    if rows > spec.rows or cols > spec.cols:
        raise ValueError(f"{rows}x{cols} pattern does not fit a {spec.rows}x{spec.cols} DMD")
    off = spec.off_level
    amplitude = off + (1.0 - off) * quantize_levels(pattern, spec.bit_depth)
    s = int(spec.subpixel_factor)
    values = expand_pixels(amplitude, s) * np.tile(unit_cell(spec), (rows, cols))
    return ComplexField(values.astype(np.complex128), CORNER)


def pixel_reflectance(pattern, spec):
    """Per-pixel mean amplitude of :func:`dmd_modulate`, i.e. what a
    spectrum sampled once per DMD pixel sees."""
    return superpixel_reduce(dmd_modulate(pattern, spec).values.real, spec.subpixel_factor)


def tilt_distance(shape, spec):
    """Signed distance (metres) of each sample from the array centre, taken
    along the tilt axis of the in-plane rotated array."""
    dx = spec.pixel_pitch / spec.subpixel_factor
    r = np.arange(shape[0]) - (shape[0] - 1) / 2
    c = np.arange(shape[1]) - (shape[1] - 1) / 2
    rot = spec.inplane_rotation
    return (r[:, None] * math.sin(rot) + c[None, :] * math.cos(rot)) * dx


def tilt_phase(field, spec, wavelength, sign=-1):
    """Multiply by ``exp(sign * 1j * sin(theta) * d * 2*pi / wavelength)``.

    ``sign=-1`` is the object-plane DMD; the specular Fourier-plane DMD
    contributes the opposite sign.
    """
    values = field.values if isinstance(field, ComplexField) else np.asarray(field)
    if spec.tilt_angle == 0:
        out = values.astype(np.complex128, copy=True)
    else:
        d = tilt_distance(values.shape[-2:], spec)
        out = values * np.exp(sign * 1j * math.sin(spec.tilt_angle) * d * 2 * math.pi / wavelength)
    if isinstance(field, ComplexField):
        return ComplexField(out, field.layout)
    return out


def carrier_bins(shape, spec, wavelength):
    """DFT bin (row, col) on which the tilt ramp centres the spectrum,
    wrapped to the sampled band and rounded to the nearest bin."""
    dx = spec.pixel_pitch / spec.subpixel_factor
    f = -math.sin(spec.tilt_angle) / wavelength
    out = []
    for n, proj in zip(shape, (math.sin(spec.inplane_rotation), math.cos(spec.inplane_rotation))):
        cycles = f * proj * dx
        cycles -= math.floor(cycles + 0.5)
        out.append(int(round(cycles * n)) % n)
    return tuple(out)


# --------------------------------------------------------------------------
# Lenses
# --------------------------------------------------------------------------

def seidel_wavefront(coeffs, xh, yh, u0=0.0):
    """Seidel wavefront error (waves) at normalised pupil point (xh, yh)
    for normalised image height ``u0``."""
    rho2 = xh ** 2 + yh ** 2
    return (coeffs.w_d * rho2 + coeffs.w040 * rho2 ** 2 + coeffs.w131 * u0 * rho2 * xh
            + coeffs.w222 * u0 ** 2 * xh ** 2 + coeffs.w220 * u0 ** 2 * rho2
            + coeffs.w311 * u0 ** 3 * xh)


def pupil_coordinates(shape, lens, wavelength, dx=None):
    """Normalised pupil coordinates of each bin of a centred spectrum.

    A bin ``k`` bins from DC sits at ``x'' = wavelength * f * k / (n * dx)``
    in the Fourier plane, with ``dx`` the object-plane sample spacing. With
    ``dx=None`` the grid half-width is mapped onto the pupil edge instead.
    """
    rows, cols = shape
    kr = np.arange(rows) - rows // 2
    kc = np.arange(cols) - cols // 2
    if dx is None:
        half = max(rows, cols) / 2
        yh, xh = kr / half, kc / half
    else:
        scale = wavelength * lens.focal_length / (dx * lens.pupil_radius)
        yh, xh = kr * scale / rows, kc * scale / cols
    return np.meshgrid(xh, yh)


def pupil_function(shape, lens, wavelength, u0=None, dx=None):
    xh, yh = pupil_coordinates(shape, lens, wavelength, dx)
    u0 = lens.image_height if u0 is None else u0
    aperture = (xh ** 2 + yh ** 2) <= 1.0
    w = seidel_wavefront(lens.seidel, xh, yh, u0)
    return np.where(aperture, np.exp(-2j * math.pi * w), 0.0)


def lens_transfer(spectrum, lens, wavelength, u0=None, dx=None):
    """Apply ``H = A * exp(-i k W)`` to a ``dc_at_center`` spectrum.

    ``W`` is in waves, so ``k W`` with ``W`` scaled by the wavelength is
    ``2 pi W``.
    """
    if spectrum.layout != CENTER:
        raise ValueError("lens_transfer expects a dc_at_center spectrum")
    h = pupil_function(spectrum.shape[-2:], lens, wavelength, u0, dx)
    return ComplexField(spectrum.values * h, CENTER)


# --------------------------------------------------------------------------
# Camera and perturbations
# --------------------------------------------------------------------------

def apply_camera(img, spec, rng=None):
    """Noise, clipping at ``saturation_level``, uniform quantisation to
    ``bit_depth`` bits, rescaled to [0, 1]."""
    img = np.asarray(img, dtype=np.float64)
    if spec.exposure is None:
        peak = img.max(axis=(-2, -1), keepdims=True)
        v = np.divide(img, peak, out=np.zeros_like(img), where=peak > 0)
    else:
        v = img * spec.exposure
    if spec.noise_sigma > 0:
        rng = np.random.default_rng() if rng is None else rng
        v = v + rng.normal(0.0, spec.noise_sigma, size=v.shape)
    v = np.clip(v, 0.0, spec.saturation_level) / spec.saturation_level
    return quantize_levels(v, spec.bit_depth)


def shift_subpixel(img, shift):
    """Translate by ``(d_row, d_col)`` samples with a Fourier phase ramp."""
    if shift[0] == 0 and shift[1] == 0:
        return np.array(img, dtype=np.float64)
    rows, cols = img.shape[-2:]
    kr = sfft.fftfreq(rows)[:, None]
    kc = sfft.fftfreq(cols)[None, :]
    ramp = np.exp(-2j * math.pi * (kr * shift[0] + kc * shift[1]))
    return sfft.ifft2(sfft.fft2(img) * ramp).real


def perturb_mask(mask, perturbations):
    """Rotate (about the array centre) then shift a Fourier-plane amplitude
    mask, keeping values inside [0, 1]."""
    out = np.asarray(mask, dtype=np.float64)
    if perturbations.rotation_error:
        out = ndimage.rotate(out, math.degrees(perturbations.rotation_error), axes=(-1, -2),
                             reshape=False, order=1, mode="constant", cval=0.0)
    out = shift_subpixel(out, perturbations.mask_shift)
    return np.clip(out, 0.0, 1.0)


def illumination_gain(shape, perturbations):
    depth = perturbations.illumination_nonuniformity
    if depth == 0:
        return np.ones(shape)
    y = np.linspace(-1, 1, shape[0])[:, None] - perturbations.illumination_center[0]
    x = np.linspace(-1, 1, shape[1])[None, :] - perturbations.illumination_center[1]
    bowl = x ** 2 + y ** 2
    return 1.0 - depth * bowl / bowl.max()


SURROGATE_DEFAULTS = dict(mask_shift=1.5, rotation_deg=0.3, illumination=0.05,
                          noise_sigma=0.01, saturation=0.9)


def make_hardware_surrogate(config, seed, magnitude=1.0):
    """Return ``config`` with seeded bench perturbations.

    Shifts are uniform in +-1.5 mask pixels per axis, rotation uniform in
    +-0.3 degrees, 5 % illumination dip at a random centre, camera noise
    0.01 and saturation at 0.9 of full scale, all scaled by ``magnitude``.
    ``magnitude=0`` returns the nominal config unchanged.
    """
    if magnitude == 0:
        return config
    d = SURROGATE_DEFAULTS
    rng = np.random.default_rng(seed)
    shift = rng.uniform(-d["mask_shift"], d["mask_shift"], size=2) * magnitude
    rotation = math.radians(rng.uniform(-d["rotation_deg"], d["rotation_deg"]) * magnitude)
    center = rng.uniform(-0.5, 0.5, size=2)
    saturation = 1.0 - (1.0 - d["saturation"]) * magnitude
    pert = PerturbationSpec(mask_shift=tuple(shift), rotation_error=rotation,
                            illumination_nonuniformity=d["illumination"] * magnitude,
                            illumination_center=tuple(center),
                            camera_noise_sigma=d["noise_sigma"] * magnitude,
                            camera_saturation=saturation)
    return dataclasses.replace(config, perturbations=pert)


# --------------------------------------------------------------------------
# The full bench
# --------------------------------------------------------------------------

def circular_flip(a):
    """``a[..., -i mod rows, -j mod cols]``: what two forward transforms do."""
    return np.roll(a[..., ::-1, ::-1], 1, axis=(-2, -1))


class FourFSystem:
    """A configured bench. Pupils and carrier offsets are cached per grid
    size, so many inputs or masks can be pushed through cheaply."""

    def __init__(self, config):
        self.config = config
        self._cache = {}

    def _planes(self, rows, cols):
        key = (rows, cols)
        if key not in self._cache:
            cfg = self.config
            s = int(cfg.dmd1.subpixel_factor)
            dx = cfg.dmd1.pixel_pitch / s
            big = (rows * s, cols * s)
            h1 = pupil_function(big, cfg.lens1, cfg.wavelength, dx=dx)
            h2 = pupil_function(big, cfg.lens2, cfg.wavelength, dx=dx)
            r0, c0 = big[0] // 2 - rows // 2, big[1] // 2 - cols // 2
            window = (slice(r0, r0 + rows), slice(c0, c0 + cols))
            self._cache[key] = dict(
                big=big, window=window,
                h1=h1, h2=h2[window],
                carrier=carrier_bins(big, cfg.dmd1, cfg.wavelength),
                gain=expand_pixels(illumination_gain((rows, cols), cfg.perturbations), s))
        return self._cache[key]

    def render_mask(self, mask):
        """Fourier-plane mask as seen by the spectrum: DMD2 per-pixel
        reflectance after the bench's rotation and shift errors."""
        refl = pixel_reflectance(mask, self.config.dmd2)
        return perturb_mask(refl, self.config.perturbations)

    def input_spectrum(self, pattern):
        """Steps up to the Fourier plane: centred spectrum restricted to
        the DMD2 window, after lens 1."""
        cfg = self.config
        pattern = np.asarray(pattern, dtype=np.float64)
        rows, cols = pattern.shape[-2:]
        planes = self._planes(rows, cols)
        field = dmd_modulate(pattern, cfg.dmd1).values * planes["gain"]
        field = tilt_phase(field, cfg.dmd1, cfg.wavelength, sign=-1)
        spectrum = sfft.fftshift(fft2o(field), axes=(-2, -1))
        # The lens axis follows the reflected beam: centre the carrier.
        kr, kc = planes["carrier"]
        if kr or kc:
            spectrum = np.roll(spectrum, (-kr, -kc), axis=(-2, -1))
        spectrum = spectrum * planes["h1"]
        return spectrum[(Ellipsis,) + planes["window"]]

    def output_intensity(self, masked, rows, cols, reorient=True):
        """From the field leaving DMD2 (``rows x cols`` window) to the
        super-pixel intensity at the camera, before detection."""
        cfg = self.config
        planes = self._planes(rows, cols)
        s = int(cfg.dmd1.subpixel_factor)
        masked = masked * planes["h2"]
        full = np.zeros(masked.shape[:-2] + planes["big"], dtype=np.complex128)
        full[(Ellipsis,) + planes["window"]] = masked
        image = fft2o(sfft.ifftshift(full, axes=(-2, -1)))
        # The specular DMD2 adds the opposite tilt phase; the camera only
        # sees intensity, so it is kept for fidelity of the field.
        image = tilt_phase(image, cfg.dmd2, cfg.wavelength, sign=+1)
        inten = intensity(image)
        if reorient:
            inten = circular_flip(inten)
        return superpixel_reduce(inten, s)

    def propagate(self, pattern, rendered_mask, rng=None, detect=True, reorient=True):
        pattern = np.asarray(pattern, dtype=np.float64)
        rows, cols = pattern.shape[-2:]
        if rendered_mask.shape[-2:] != (rows, cols):
            raise ValueError(
                f"Fourier mask {rendered_mask.shape[-2:]} does not match the "
                f"{rows}x{cols} input spectrum")
        spectrum = self.input_spectrum(pattern)
        if pattern.ndim == 2 and rendered_mask.ndim == 3:
            spectrum = spectrum[None]
        out = self.output_intensity(spectrum * rendered_mask, rows, cols, reorient)
        if detect:
            out = apply_camera(out, self.config.effective_camera(), rng)
        return out


def propagate_4f(input_pattern, fourier_mask, config, rng=None, detect=True, reorient=True):
    """Image an input pattern through the bench with a Fourier-plane mask.

    ``fourier_mask`` is authored ``dc_at_center`` at the same pixel size as
    the input and may carry a leading stack axis (one output per mask).
    Returns camera frames in [0, 1], or raw super-pixel intensity when
    ``detect`` is false. ``reorient=False`` leaves the lens-induced
    inversion in place.
    """
    input_pattern = np.asarray(input_pattern, dtype=np.float64)
    fourier_mask = np.asarray(fourier_mask, dtype=np.float64)
    if fourier_mask.shape[-2:] != input_pattern.shape[-2:]:
        raise ValueError(
            f"Fourier mask {fourier_mask.shape[-2:]} does not match the input "
            f"{input_pattern.shape[-2:]}")
    bench = FourFSystem(config)
    return bench.propagate(input_pattern, bench.render_mask(fourier_mask), rng=rng,
                           detect=detect, reorient=reorient)


def ideal_filter(image, mask):
    """Reference pipeline: ``|idft2(dft2(x) * ifftshift(mask))|**2``."""
    spectrum = fft2o(np.asarray(image, dtype=np.complex128))
    return intensity(sfft.ifft2(spectrum * sfft.ifftshift(mask, axes=(-2, -1)), norm="ortho"))


def flat_field_gain(config, size=64):
    """Raw bench response to a uniform input through an open mask, as a
    fraction of the ideal response (1). Averaged over the central half of
    the frame to stay clear of edge ringing."""
    frame = propagate_4f(np.ones((size, size)), np.ones((size, size)), config, detect=False)
    q = size // 4
    return float(frame[q:size - q, q:size - q].mean())


def calibrate_exposure(config, size=64):
    """Set the camera exposure so a flat field reads its ideal level.

    The bench loses light to the mirror gaps, the holes, the blazed tilt and
    the finite contrast; a one-scalar exposure calibration restores the
    intensity scale the ideal model was trained on.
    """
    gain = flat_field_gain(config, size)
    cam = config.camera
    base = 1.0 if cam.exposure is None else cam.exposure
    return dataclasses.replace(config, camera=dataclasses.replace(cam, exposure=base / gain))
