"""Waveform augmentations applied before embedding extraction.

Eight effects with defaults matching the published evaluation protocol:
gaussian noise (noise std drawn as a fraction of signal std), pitch shift
(+-7 semitones, resample-based), polarity inversion, gain (-20 to -1 dB),
high/low pass (Butterworth, cutoff drawn from the stated band), delay
(echo at a 50 ms grid between 200 and 500 ms at half volume), and a small
synthetic-impulse reverb (reverberance 0-100, damping 75, room size 100).

Randomized parameters are drawn from the RNG passed in, so a fixed
per-sample seed makes every augmentation bit-reproducible. Overrides are
validated against the allowed ranges.
"""

from __future__ import annotations

import numpy as np
from scipy import signal

AUGMENTATION_NONE = "none"


class InvalidAugmentationParams(Exception):
    """An override falls outside the allowed parameter range."""


# name -> {param: (default, low, high)}
AUGMENTATIONS: dict[str, dict[str, tuple[float, float, float]]] = {
    "gaussian_noise": {"min_snr": (0.0001, 0.0, 1.0), "max_snr": (0.01, 0.0, 1.0)},
    "pitch_shift": {"min_semitones": (-7.0, -7.0, 7.0), "max_semitones": (7.0, -7.0, 7.0)},
    "polarity_inversion": {},
    "gain": {"min_gain_db": (-20.0, -20.0, -1.0), "max_gain_db": (-1.0, -20.0, -1.0)},
    "high_pass": {"min_cutoff_hz": (200.0, 200.0, 1200.0), "max_cutoff_hz": (1200.0, 200.0, 1200.0)},
    "low_pass": {"min_cutoff_hz": (2200.0, 2200.0, 4000.0), "max_cutoff_hz": (4000.0, 2200.0, 4000.0)},
    "delay": {
        "volume_factor": (0.5, 0.0, 1.0),
        "min_delay_ms": (200.0, 50.0, 500.0),
        "max_delay_ms": (500.0, 50.0, 500.0),
        "delay_interval_ms": (50.0, 1.0, 500.0),
    },
    "reverb": {
        "min_reverberance": (0.0, 0.0, 100.0),
        "max_reverberance": (100.0, 0.0, 100.0),
        "damping": (75.0, 0.0, 100.0),
        "room_size": (100.0, 1.0, 100.0),
    },
}


def resolve_params(name: str, overrides: dict[str, float] | None = None) -> dict[str, float]:
    """Merge overrides into the defaults, enforcing the allowed ranges."""
    if name == AUGMENTATION_NONE:
        if overrides:
            raise InvalidAugmentationParams("augmentation 'none' takes no parameters")
        return {}
    if name not in AUGMENTATIONS:
        raise InvalidAugmentationParams(f"unknown augmentation {name!r}; expected one of {sorted(AUGMENTATIONS)}")
    spec = AUGMENTATIONS[name]
    params = {key: default for key, (default, _, _) in spec.items()}
    for key, value in (overrides or {}).items():
        if key not in spec:
            raise InvalidAugmentationParams(f"{name}: unknown parameter {key!r}")
        _, low, high = spec[key]
        value = float(value)
        if not low <= value <= high:
            raise InvalidAugmentationParams(f"{name}.{key}={value} outside [{low}, {high}]")
        params[key] = value
    return params


def condition_string(name: str, params: dict[str, float], seed: int | None = None) -> str:
    """Human-readable condition tag echoed into the output manifest."""
    if name == AUGMENTATION_NONE:
        return "clean"
    parts = [f"{key}={params[key]:g}" for key in sorted(params)]
    if seed is not None:
        parts.append(f"seed={seed}")
    return f"{name}({','.join(parts)})"


def apply_augmentation(
    name: str,
    samples: np.ndarray,
    sample_rate: int,
    rng: np.random.Generator,
    params: dict[str, float] | None = None,
) -> np.ndarray:
    samples = np.asarray(samples, dtype=np.float32)
    if name == AUGMENTATION_NONE:
        return samples
    params = resolve_params(name, params) if params is None or _needs_merge(name, params) else params
    fn = _DISPATCH[name]
    return fn(samples, sample_rate, rng, params).astype(np.float32)


def _needs_merge(name: str, params: dict[str, float]) -> bool:
    return set(params) != set(AUGMENTATIONS.get(name, {}))


def _gaussian_noise(samples, sample_rate, rng, p):
    std = float(samples.std())
    noise_std = rng.uniform(p["min_snr"], p["max_snr"]) * std
    return samples + rng.normal(0.0, noise_std, size=samples.shape)


def _pitch_shift(samples, sample_rate, rng, p):
    semitones = rng.uniform(p["min_semitones"], p["max_semitones"])
    rate = 2.0 ** (semitones / 12.0)
    # Resample-based shift: duration changes, so trim or zero-pad back.
    positions = np.arange(0, len(samples), rate)
    shifted = np.interp(positions, np.arange(len(samples)), samples)
    if len(shifted) >= len(samples):
        return shifted[: len(samples)]
    return np.pad(shifted, (0, len(samples) - len(shifted)))


def _polarity_inversion(samples, sample_rate, rng, p):
    return -samples


def _gain(samples, sample_rate, rng, p):
    db = rng.uniform(p["min_gain_db"], p["max_gain_db"])
    return samples * (10.0 ** (db / 20.0))


def _butterworth(samples, sample_rate, cutoff, btype):
    nyquist = sample_rate / 2.0
    cutoff = min(cutoff, nyquist * 0.99)
    sos = signal.butter(4, cutoff, btype=btype, fs=sample_rate, output="sos")
    return signal.sosfilt(sos, samples)


def _high_pass(samples, sample_rate, rng, p):
    cutoff = rng.uniform(p["min_cutoff_hz"], p["max_cutoff_hz"])
    return _butterworth(samples, sample_rate, cutoff, "highpass")


def _low_pass(samples, sample_rate, rng, p):
    cutoff = rng.uniform(p["min_cutoff_hz"], p["max_cutoff_hz"])
    return _butterworth(samples, sample_rate, cutoff, "lowpass")


def _delay(samples, sample_rate, rng, p):
    # Delay is drawn on a fixed grid between the bounds.
    steps = np.arange(p["min_delay_ms"], p["max_delay_ms"] + 1e-9, p["delay_interval_ms"])
    delay_ms = float(steps[rng.integers(0, len(steps))])
    offset = int(round(sample_rate * delay_ms / 1000.0))
    out = samples.astype(np.float64).copy()
    if 0 < offset < len(samples):
        out[offset:] += p["volume_factor"] * samples[:-offset]
    return out


def _reverb(samples, sample_rate, rng, p):
    reverberance = rng.uniform(p["min_reverberance"], p["max_reverberance"])
    # Synthetic impulse response: decaying noise tail whose length scales
    # with room size and whose decay rate scales with damping.
    ir_len = max(2, int(sample_rate * 0.25 * p["room_size"] / 100.0))
    t = np.arange(ir_len) / sample_rate
    decay_rate = 2.0 + 10.0 * p["damping"] / 100.0
    envelope = np.exp(-decay_rate * t / max(t[-1], 1e-6))
    tail = rng.normal(0.0, 1.0, size=ir_len) * envelope
    tail[0] = 0.0
    wet = signal.fftconvolve(samples, tail, mode="full")[: len(samples)]
    peak = np.max(np.abs(wet))
    if peak > 0:
        wet = wet * (np.max(np.abs(samples)) / peak)
    mix = reverberance / 100.0 * 0.5
    return (1.0 - mix) * samples + mix * wet


_DISPATCH = {
    "gaussian_noise": _gaussian_noise,
    "pitch_shift": _pitch_shift,
    "polarity_inversion": _polarity_inversion,
    "gain": _gain,
    "high_pass": _high_pass,
    "low_pass": _low_pass,
    "delay": _delay,
    "reverb": _reverb,
}
