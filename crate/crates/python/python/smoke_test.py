"""Smoke test for the pynapres extension: python python/smoke_test.py"""

import math
import os
import tempfile

import pynapres

FORMANTS = [650.0, 1230.0, 2550.0, 3600.0, 4730.0]
RATE = 48_000


def main():
    clean = pynapres.synth_vowel(seed=0)
    assert len(clean) == RATE // 2
    rms = math.sqrt(sum(x * x for x in clean) / len(clean))
    assert abs(rms - 0.2) < 1e-9, rms

    noisy = pynapres.add_white_noise(clean, RATE, 100.0, 0)
    f0 = pynapres.estimate_f0(noisy, RATE)
    assert abs(f0 - 120.0) < 1.0, f0

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "vowel.wav")
        pynapres.write_wav(path, noisy, RATE)
        samples, rate = pynapres.read_wav(path)
        assert rate == RATE and len(samples) == len(noisy)

    tone = [math.sin(2 * math.pi * 1007.3 * n / RATE) for n in range(RATE // 2)]
    cloud = pynapres.reassign(tone, RATE)
    near = sum(abs(f - 1007.3) <= 2.0 for f in cloud.freqs) / len(cloud)
    assert near >= 0.9, near

    cloud = pynapres.napres(noisy, RATE, 120.0)
    assert cloud.j >= 50, cloud
    again = pynapres.PointCloud.from_csv(cloud.to_csv())
    assert len(again) == len(cloud)

    gmm = pynapres.gmm_formants(cloud)
    for got, want in zip(gmm[:4], FORMANTS):
        assert got is not None and abs(got / want - 1) < 0.05, (got, want)

    lpc = pynapres.lpc_formants(noisy, RATE)
    assert len(lpc) == 5

    try:
        pynapres.napres(noisy, RATE, -1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative f0 accepted")

    print("pynapres smoke test passed:", cloud, [round(f, 1) if f else None for f in gmm])


if __name__ == "__main__":
    main()
