"""Seeded synthetic speech-like corpus for demos and acceptance runs.

Two families of harmonic signals stand in for human and synthesized
speech.  The human-like family is a low-pitched harmonic stack with a
steep spectral rolloff and independent random phases, so no triple of its
components satisfies the quadratic phase relation.  The engine families
inject quadratically phase-coupled triads (the third tone's phase is the
sum of the other two) on flatter, higher spectral envelopes.  Both carry a
slow amplitude modulation plus a noise floor so frame statistics are not
degenerate.
"""

import numpy as np

from .audio_io import AudioClip, ClassLabel

SAMPLE_RATE = 16000
DURATION_S = 4.2

# Per-engine synthesis profiles: triad count and bands, envelope tilt of the
# uncoupled dressing tones, amplitude-modulation rate, noise level.
ENGINE_PROFILES = {
    ClassLabel.SPIK_AI: dict(
        triads=3, f1=(350.0, 600.0), f2=(650.0, 950.0),
        extra_tones=4, extra_band=(1500.0, 3000.0), am_hz=7.0, noise=0.005,
    ),
    ClassLabel.NATURAL_READER: dict(
        triads=2, f1=(250.0, 450.0), f2=(500.0, 800.0),
        extra_tones=6, extra_band=(1000.0, 2200.0), am_hz=5.0, noise=0.008,
    ),
    ClassLabel.REPLICA: dict(
        triads=3, f1=(500.0, 800.0), f2=(900.0, 1400.0),
        extra_tones=2, extra_band=(2500.0, 4000.0), am_hz=9.0, noise=0.004,
    ),
}


def _normalize(signal, peak=0.9):
    top = np.abs(signal).max()
    return signal * (peak / top) if top > 0 else signal


def synth_human_clip(rng, sample_rate=SAMPLE_RATE, duration_s=DURATION_S):
    """Harmonic stack, steep rolloff, independent phases per harmonic."""
    t = np.arange(int(round(duration_s * sample_rate))) / sample_rate
    f0 = rng.uniform(120.0, 240.0)
    signal = np.zeros_like(t)
    for h in range(1, 11):
        if h * f0 >= sample_rate / 2:
            break
        amp = h ** -1.2
        phase = rng.uniform(0.0, 2.0 * np.pi)
        signal += amp * np.cos(2.0 * np.pi * h * f0 * t + phase)
    am = 1.0 + 0.3 * np.sin(2.0 * np.pi * rng.uniform(2.0, 4.0) * t)
    signal = signal * am + rng.normal(0.0, 0.01, size=t.size)
    return _normalize(signal)


def synth_engine_clip(label, rng, sample_rate=SAMPLE_RATE, duration_s=DURATION_S):
    """Flat-envelope tones with quadratically phase-coupled triads."""
    profile = ENGINE_PROFILES[label]
    t = np.arange(int(round(duration_s * sample_rate))) / sample_rate
    signal = np.zeros_like(t)
    for _ in range(profile["triads"]):
        f1 = rng.uniform(*profile["f1"])
        f2 = rng.uniform(*profile["f2"])
        p1 = rng.uniform(0.0, 2.0 * np.pi)
        p2 = rng.uniform(0.0, 2.0 * np.pi)
        signal += 0.8 * np.cos(2.0 * np.pi * f1 * t + p1)
        signal += 0.8 * np.cos(2.0 * np.pi * f2 * t + p2)
        # Third component completes the quadratic phase relation.
        signal += 0.8 * np.cos(2.0 * np.pi * (f1 + f2) * t + p1 + p2)
    for _ in range(profile["extra_tones"]):
        f = rng.uniform(*profile["extra_band"])
        signal += 0.4 * np.cos(2.0 * np.pi * f * t + rng.uniform(0.0, 2.0 * np.pi))
    am = 1.0 + 0.1 * np.sin(2.0 * np.pi * profile["am_hz"] * t)
    signal = signal * am + rng.normal(0.0, profile["noise"], size=t.size)
    return _normalize(signal)


def synth_clip(label, rng, sample_rate=SAMPLE_RATE, duration_s=DURATION_S,
               source_id=""):
    if label is ClassLabel.HUMAN:
        samples = synth_human_clip(rng, sample_rate, duration_s)
    else:
        samples = synth_engine_clip(label, rng, sample_rate, duration_s)
    return AudioClip(samples, sample_rate, source_id)


def corpus_labels(n_classes):
    if n_classes == 2:
        return [ClassLabel.HUMAN, ClassLabel.SPIK_AI]
    if n_classes == 4:
        return [ClassLabel.HUMAN, ClassLabel.NATURAL_READER,
                ClassLabel.SPIK_AI, ClassLabel.REPLICA]
    raise ValueError("corpus supports 2 or 4 classes")


def generate_corpus(out_dir, count=400, n_classes=2, seed=0,
                    sample_rate=SAMPLE_RATE, duration_s=DURATION_S):
    """Write `count` WAV clips plus manifest.csv; returns the manifest path.

    Clip i gets label classes[i % n_classes] and its own RNG stream derived
    from (seed, i), so the corpus is reproducible file by file.
    """
    from pathlib import Path

    from .audio_io import write_wav

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    labels = corpus_labels(n_classes)
    manifest_path = out / "manifest.csv"
    with open(manifest_path, "w", encoding="utf-8") as mf:
        mf.write("# synthetic corpus: seed=%d count=%d classes=%d\n"
                 % (seed, count, n_classes))
        for i in range(count):
            label = labels[i % len(labels)]
            rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
            clip = synth_clip(label, rng, sample_rate, duration_s,
                              source_id=f"synth-{i:04d}")
            name = f"clip_{i:04d}_{label.value}.wav"
            write_wav(out / name, clip)
            mf.write(f"{name},{label.value}\n")
    return manifest_path
