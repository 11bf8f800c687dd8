"""Noise sampling, contamination, measurement, and calibration.

Five noise families are supported, each tied to a fixed application rule:

==============  ==============  ==========================================
family          rule            parameters
==============  ==============  ==========================================
gaussian        additive        mean, std
salt_pepper     replacement     density (per-polarity flip probability)
speckle         multiplicative  alpha (shape), theta (scale)
poisson         additive        rate, centered (optional flag)
uniform         additive        low, high
==============  ==============  ==========================================

Salt & pepper is value replacement (flipped pixels become 0 or 255) rather
than an additive field, since its distribution is defined directly on pixel
values. Speckle multiplies by a Gamma field; calibration keeps it mean-one
(theta = 1/alpha) so expected brightness is preserved.

Sampling is driven by the counter-based Philox generator, so a spec plus
dimensions always reproduces the identical field, and independent streams
are derived with :func:`spawn_seed` rather than by consuming a shared
generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .image import MAX_GRAY, Image, clip_to_range

FAMILIES = ("gaussian", "salt_pepper", "speckle", "poisson", "uniform")

FAMILY_RULES = {
    "gaussian": "additive",
    "salt_pepper": "replacement",
    "speckle": "multiplicative",
    "poisson": "additive",
    "uniform": "additive",
}

_FAMILY_PARAMS = {
    "gaussian": {"mean", "std"},
    "salt_pepper": {"density"},
    "speckle": {"alpha", "theta"},
    "poisson": {"rate", "centered"},
    "uniform": {"low", "high"},
}

# mask codes for salt & pepper fields
PEPPER = -1
KEEP = 0
SALT = 1


class CalibrationError(RuntimeError):
    """Requested noise level is unreachable within the parameter bounds."""

    def __init__(self, family: str, target_k: float, best_param: float, best_k: float):
        self.family = family
        self.target_k = target_k
        self.best_param = best_param
        self.best_k = best_k
        super().__init__(
            f"{family}: target k={target_k:g}% unreachable; "
            f"best achieved k={best_k:.3f}% at parameter {best_param:g}"
        )


def spawn_seed(root: int, *key: int) -> int:
    """Derive an independent 64-bit sub-seed from a root seed and a stream key."""
    ss = np.random.SeedSequence(entropy=(int(root),) + tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def _generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


@dataclass(frozen=True)
class NoiseSpec:
    """A reproducible noise recipe: family, parameters, rule, and seed."""

    family: str
    params: Mapping[str, float]
    rule: str = ""
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}")
        expected_rule = FAMILY_RULES[self.family]
        rule = self.rule or expected_rule
        if rule != expected_rule:
            raise ValueError(
                f"{self.family} noise requires rule {expected_rule!r}, got {rule!r}"
            )
        object.__setattr__(self, "rule", rule)
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        params = {key: float(value) for key, value in dict(self.params).items()}
        allowed = _FAMILY_PARAMS[self.family]
        unknown = set(params) - allowed
        if unknown:
            raise ValueError(f"unknown {self.family} parameters: {sorted(unknown)}")
        self._validate_params(params)
        object.__setattr__(self, "params", params)

    def _validate_params(self, p: dict) -> None:
        fam = self.family
        if fam == "gaussian":
            if "mean" not in p or "std" not in p:
                raise ValueError("gaussian noise needs 'mean' and 'std'")
            if p["std"] < 0:
                raise ValueError(f"gaussian std must be >= 0, got {p['std']}")
        elif fam == "salt_pepper":
            if "density" not in p:
                raise ValueError("salt_pepper noise needs 'density'")
            if not 0 <= p["density"] < 0.5:
                raise ValueError(f"density must lie in [0, 0.5), got {p['density']}")
        elif fam == "speckle":
            if "alpha" not in p or "theta" not in p:
                raise ValueError("speckle noise needs 'alpha' and 'theta'")
            if p["alpha"] <= 0 or p["theta"] <= 0:
                raise ValueError("speckle alpha and theta must be > 0")
        elif fam == "poisson":
            if "rate" not in p:
                raise ValueError("poisson noise needs 'rate'")
            if p["rate"] <= 0:
                raise ValueError(f"poisson rate must be > 0, got {p['rate']}")
            p["centered"] = float(bool(p.get("centered", 0.0)))
        elif fam == "uniform":
            if "low" not in p or "high" not in p:
                raise ValueError("uniform noise needs 'low' and 'high'")
            if p["low"] >= p["high"]:
                raise ValueError(f"uniform bounds need low < high, got [{p['low']}, {p['high']}]")

    def with_seed(self, seed: int) -> "NoiseSpec":
        return replace(self, seed=seed)

    # -- flat key-value serialization (CLI --emit-spec / --spec) ------------

    def to_text(self) -> str:
        lines = [f"family = {self.family}", f"rule = {self.rule}", f"seed = {self.seed}"]
        for key in sorted(self.params):
            lines.append(f"{key} = {self.params[key]!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "NoiseSpec":
        fields: dict[str, str] = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad noise-spec line: {raw!r}")
            key, val = (part.strip() for part in line.split("=", 1))
            fields[key] = val
        try:
            family = fields.pop("family")
            rule = fields.pop("rule", "")
            seed = int(fields.pop("seed"))
        except KeyError as exc:
            raise ValueError(f"noise spec missing field {exc}") from None
        params = {k: float(v) for k, v in fields.items()}
        return cls(family=family, params=params, rule=rule, seed=seed)


@dataclass(frozen=True)
class NoiseField:
    """A sampled noise realization, dimension-matched to a target image.

    Continuous families store a float array; salt & pepper stores an int8
    mask of {PEPPER, KEEP, SALT} decisions.
    """

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.ndim != 2:
            raise ValueError(f"noise field must be 2-D, got shape {arr.shape}")
        if arr.dtype != np.int8:
            arr = np.asarray(arr, dtype=np.float64)
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def is_mask(self) -> bool:
        return self.values.dtype == np.int8


def sample_noise(spec: NoiseSpec, height: int, width: int) -> NoiseField:
    """Draw an i.i.d. noise field for ``spec``, deterministically from its seed."""
    if height < 1 or width < 1:
        raise ValueError(f"field dimensions must be >= 1, got {height}x{width}")
    rng = _generator(spec.seed)
    shape = (height, width)
    p = spec.params
    if spec.family == "gaussian":
        values = rng.normal(p["mean"], p["std"], shape) if p["std"] > 0 else np.full(shape, p["mean"])
    elif spec.family == "salt_pepper":
        u = rng.random(shape)
        mask = np.zeros(shape, dtype=np.int8)
        d = p["density"]
        mask[u < d] = PEPPER
        mask[u >= 1.0 - d] = SALT
        return NoiseField(mask)
    elif spec.family == "speckle":
        values = rng.gamma(p["alpha"], p["theta"], shape)
    elif spec.family == "poisson":
        values = rng.poisson(p["rate"], shape).astype(np.float64)
        if p.get("centered"):
            values -= p["rate"]
    else:  # uniform
        values = rng.uniform(p["low"], p["high"], shape)
    return NoiseField(values)


def apply_noise(img: Image, field: NoiseField, rule: str) -> Image:
    """Contaminate ``img`` with ``field`` under the given rule; output clipped."""
    if (field.height, field.width) != img.shape:
        raise ValueError(
            f"field dimensions {field.height}x{field.width} do not match "
            f"image {img.height}x{img.width}"
        )
    if rule == "additive":
        if field.is_mask:
            raise ValueError("additive rule needs a value field, got a mask")
        out = img.pixels + field.values
    elif rule == "multiplicative":
        if field.is_mask:
            raise ValueError("multiplicative rule needs a value field, got a mask")
        out = img.pixels * field.values
    elif rule == "replacement":
        if not field.is_mask:
            raise ValueError("replacement rule needs a salt/pepper mask field")
        out = img.pixels.copy()
        out[field.values == PEPPER] = 0.0
        out[field.values == SALT] = MAX_GRAY
    else:
        raise ValueError(f"unknown application rule {rule!r}")
    return clip_to_range(Image(out))


def contaminate(img: Image, spec: NoiseSpec) -> Image:
    """Sample a field from ``spec`` and apply it under the spec's rule."""
    return apply_noise(img, sample_noise(spec, img.height, img.width), spec.rule)


def relative_noise_level(clean: Image, noisy: Image) -> float:
    """Relative contamination in percent: ||noisy - clean||_F / ||clean||_F * 100."""
    if clean.shape != noisy.shape:
        raise ValueError(f"dimension mismatch: {clean.shape} vs {noisy.shape}")
    denom = np.linalg.norm(clean.pixels)
    if denom == 0.0:
        raise ValueError("clean image has zero norm; relative level undefined")
    return float(np.linalg.norm(noisy.pixels - clean.pixels) / denom * 100.0)


def realized_noise_level(spec: NoiseSpec, clean: Image, draws: int = 5) -> float:
    """Mean relative noise level of ``spec`` over seeded repeat applications.

    Draw ``i`` uses the sub-seed ``spawn_seed(spec.seed, i)``, so the value
    is a deterministic function of (spec, clean, draws). This is the
    quantity calibration targets.
    """
    if draws < 1:
        raise ValueError("draws must be >= 1")
    total = 0.0
    for i in range(draws):
        noisy = contaminate(clean, spec.with_seed(spawn_seed(spec.seed, i)))
        total += relative_noise_level(clean, noisy)
    return total / draws


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------

# Each family exposes one scalar knob t, chosen so realized noise grows with t:
#   gaussian     t = std              (mean fixed at 0)
#   salt_pepper  t = density          (bounded below 0.5)
#   speckle      t = 1/alpha          (theta = 1/alpha keeps the field mean-one;
#                                      alpha >= 1 bounds t at 1)
#   poisson      t = rate             (calibration centers the field by default:
#                                      the raw field's +rate brightness shift is
#                                      deterministic bias, not removable noise)
#   uniform      t = high             (low = -high, symmetric zero-mean)

_KNOB_CAP = {"salt_pepper": float(np.nextafter(0.5, 0.0)), "speckle": 1.0}


def _spec_from_knob(family: str, t: float, seed: int, centered_poisson: bool = True) -> NoiseSpec:
    if family == "gaussian":
        params = {"mean": 0.0, "std": t}
    elif family == "salt_pepper":
        params = {"density": t}
    elif family == "speckle":
        params = {"alpha": 1.0 / t, "theta": t}
    elif family == "poisson":
        params = {"rate": t, "centered": centered_poisson}
    elif family == "uniform":
        params = {"low": -t, "high": t}
    else:
        raise ValueError(f"unknown noise family {family!r}")
    return NoiseSpec(family=family, params=params, seed=seed)


def calibration_knob(spec: NoiseSpec) -> float:
    """Read back the scalar calibration parameter from a spec."""
    fam = spec.family
    if fam == "gaussian":
        return spec.params["std"]
    if fam == "salt_pepper":
        return spec.params["density"]
    if fam == "speckle":
        return 1.0 / spec.params["alpha"]
    if fam == "poisson":
        return spec.params["rate"]
    return spec.params["high"]


def _initial_knob(family: str, target_k: float, clean: Image) -> float:
    # pre-clipping estimate; the search refines from here
    rms = float(np.sqrt(np.mean(clean.pixels**2)))
    frac = target_k / 100.0
    if family == "gaussian":
        return max(frac * rms, 1e-6)
    if family == "salt_pepper":
        return min(max((frac * rms / 180.0) ** 2, 1e-8), 0.49)
    if family == "speckle":
        return min(max(frac**2, 1e-8), 1.0)
    if family == "poisson":
        s = frac * rms
        return max(0.5 * (np.sqrt(1 + 4 * s * s) - 1), 1e-6)
    return max(np.sqrt(3.0) * frac * rms, 1e-6)  # uniform


def calibrate_noise(
    clean: Image,
    family: str,
    target_k: float,
    seed: int,
    draws: int = 5,
    tolerance: float = 0.05,
    max_iterations: int = 40,
    centered_poisson: bool = True,
) -> NoiseSpec:
    """Find family parameters whose mean realized noise level hits ``target_k``.

    Bisection on the family's scalar knob against the post-clipping realized
    level (:func:`realized_noise_level`), with the same per-draw sub-seeds at
    every iteration so the objective is deterministic and monotone.

    Calibrated Poisson specs are centered (rate subtracted) unless
    ``centered_poisson`` is False: the raw field's mean is a deterministic
    brightness bias that no mean-preserving denoiser can undo, so leaving it
    in makes relative-level targets mostly measure the bias.

    Raises :class:`CalibrationError` when the target is unreachable within
    the family's parameter bounds; the error reports the best achieved level.
    """
    if not 0.0 < target_k <= 100.0:
        raise ValueError(f"target_k must lie in (0, 100], got {target_k}")
    if family not in FAMILIES:
        raise ValueError(f"unknown noise family {family!r}")
    if np.linalg.norm(clean.pixels) == 0.0:
        raise ValueError("cannot calibrate against a zero-norm image")

    def realized(t: float) -> float:
        return realized_noise_level(
            _spec_from_knob(family, t, seed, centered_poisson), clean, draws
        )

    cap = _KNOB_CAP.get(family, np.inf)
    best_t, best_k = np.nan, np.inf  # best = closest to target

    def consider(t: float, k: float) -> None:
        nonlocal best_t, best_k
        if abs(k - target_k) < abs(best_k - target_k):
            best_t, best_k = t, k

    # bracket [lo, hi] with realized(lo) < target <= realized(hi)
    lo, k_lo = 0.0, 0.0
    hi = min(_initial_knob(family, target_k, clean), cap)
    k_hi = realized(hi)
    consider(hi, k_hi)
    expansions = 0
    while k_hi < target_k:
        if hi >= cap or expansions >= 60:
            raise CalibrationError(family, target_k, best_t, best_k)
        lo, k_lo = hi, k_hi
        hi = min(hi * 2.0, cap)
        new_k = realized(hi)
        consider(hi, new_k)
        if new_k <= k_hi + 1e-9 and new_k < target_k:
            # saturated below the target (clipping ceiling)
            raise CalibrationError(family, target_k, best_t, best_k)
        k_hi = new_k
        expansions += 1

    for _ in range(max_iterations):
        if abs(best_k - target_k) <= tolerance:
            break
        mid = 0.5 * (lo + hi)
        k_mid = realized(mid)
        consider(mid, k_mid)
        if k_mid < target_k:
            lo, k_lo = mid, k_mid
        else:
            hi, k_hi = mid, k_mid

    if abs(best_k - target_k) > 0.5:
        raise CalibrationError(family, target_k, best_t, best_k)
    return _spec_from_knob(family, best_t, seed, centered_poisson)
