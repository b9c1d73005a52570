"""Acceptance gate. Each criterion records its outcome; the terminal summary prints one line per criterion."""

import csv
import json
import os
import subprocess
import sys
import warnings

import numpy as np
import pytest

from pwstega import cli
from pwstega.evalkit import psnr, ssim
from pwstega.fixtures import synthetic_image
from pwstega.latentops import noise_flip
from pwstega.selftest import coupled_roundtrip_error, protocol_psnrs
from pwstega.images import digest
from pwstega.pipeline import StegoConfig, reference_image
from pwstega.seedkit import derive_seed, generate_flip_mask

ETAS = (0.01, 0.05, 0.5, 1.0)

_MASK_CHILD = """
import json, sys
from pwstega.seedkit import derive_seed, generate_flip_mask
cases = json.loads(sys.argv[1])
print(json.dumps([generate_flip_mask(derive_seed(pw, "noise-flip"), tuple(s), e).digest() for pw, s, e in cases]))
"""


def test_1_flip_involution(acceptance):
    rng = np.random.default_rng(101)
    ok = 0
    for i in range(100):
        shape = tuple(int(v) for v in rng.integers(1, 48, size=3))
        x = rng.standard_normal(shape).astype(np.float32)
        mask = generate_flip_mask(derive_seed(f"acc-{i}-{rng.integers(1 << 30)}", "noise-flip"), shape, ETAS[i % 4])
        ok += noise_flip(noise_flip(x, mask), mask).tobytes() == x.tobytes()
    assert acceptance("1 flip involution", "all", ok == 100, f"{ok}/100 bit-identical")


def test_2_mask_budget(acceptance):
    rng = np.random.default_rng(202)
    cases = []
    for i in range(50):
        shape = [int(v) for v in rng.integers(1, 64, size=3)]
        cases.append((f"budget-{i}", shape, float(rng.uniform())))
    exact = sum(
        generate_flip_mask(derive_seed(pw, "noise-flip"), tuple(s), e).count == int(np.floor(e * np.prod(s)))
        for pw, s, e in cases
    )
    here = [generate_flip_mask(derive_seed(pw, "noise-flip"), tuple(s), e).digest() for pw, s, e in cases]
    child = subprocess.run([sys.executable, "-c", _MASK_CHILD, json.dumps(cases)], capture_output=True, text=True, check=True)
    same = json.loads(child.stdout) == here
    assert acceptance("2 mask budget", "all", exact == 50 and same, f"{exact}/50 exact popcounts; cross-process masks identical={same}")


@pytest.mark.parametrize("p", (0.5, 0.93, 1.0))
@pytest.mark.parametrize("xi", (0.2, 0.6, 1.0))
@pytest.mark.parametrize("kind", ("zero", "affine", "random"))
def test_3_coupled_exactness(acceptance, kind, xi, p):
    with warnings.catch_warnings():
        # p = 0.5 overflows on the way up; the error is still measured
        warnings.simplefilter("ignore", RuntimeWarning)
        err = coupled_roundtrip_error(kind, p, xi)
    passed = bool(np.isfinite(err) and err < 1e-4)
    acceptance("3 coupled exactness", f"{kind}/xi={xi}/p={p}", passed, f"max abs {err:.2e}")
    assert passed, f"round-trip max abs error {err:.3e} >= 1e-4"


@pytest.fixture(scope="module")
def protocol_rows():
    return protocol_psnrs(10)


def test_4_protocol_round_trip(acceptance, protocol_rows):
    correct = [r["correct"] for r in protocol_rows]
    assert acceptance("4 protocol round trip", "all", min(correct) > 50, f"min PSNR {min(correct):.1f} dB over 10 fixtures")


def test_5_key_sensitivity(acceptance, protocol_rows):
    correct = np.mean([r["correct"] for r in protocol_rows])
    wrong = np.mean([r["wrong"] for r in protocol_rows])
    none = np.mean([r["none"] for r in protocol_rows])
    cfg = StegoConfig.toy()
    shape = (3, 64, 64)
    real = digest(reference_image("password-0", "a watercolor landscape", shape, cfg))
    wrong_refs = {digest(reference_image(f"password-0-wrong-{i}", "a watercolor landscape", shape, cfg)) for i in range(10)}
    distinct = len(wrong_refs) == 10 and real not in wrong_refs
    passed = correct - wrong > 20 and correct - none > 20 and distinct
    detail = f"margins {correct - wrong:.1f} dB (wrong), {correct - none:.1f} dB (none); distinct refs={distinct}"
    assert acceptance("5 key sensitivity", "all", passed, detail)


def test_6_metric_sanity(acceptance):
    a = synthetic_image(0)
    zero = np.zeros((3, 16, 16), np.uint8)
    rng = np.random.default_rng(6)
    sym = max(abs(ssim(x, y) - ssim(y, x)) for x, y in (rng.random((2, 3, 24, 24)) for _ in range(20)))
    checks = {
        "0 dB": psnr(zero, zero + 255) == 0.0,
        "100 dB cap": psnr(a, a) == 100.0,
        "48.131 dB": round(psnr(zero, zero + 1), 3) == 48.131,
        "ssim identity": ssim(a, a) == 1.0,
        "ssim symmetry": sym <= 1e-9,
    }
    bad = [k for k, v in checks.items() if not v]
    assert acceptance("6 metric sanity", "all", not bad, "all examples exact" if not bad else f"failed: {bad}")


def test_7_drift_curve(acceptance, tmp_path, capsys):
    path = tmp_path / "sweep.csv"
    code = cli.main(["selftest", "--depth-sweep", str(path)])
    capsys.readouterr()
    rows = list(csv.DictReader(path.open())) if path.exists() else []
    rms = [float(r["rms_error"]) for r in rows]
    mono = len(rms) == 50 and all(b >= a for a, b in zip(rms, rms[1:]))
    detail = f"{len(rms)} depths, rms {rms[0]:.2e} -> {rms[-1]:.2e}" if rms else "no CSV"
    assert acceptance("7 drift curve", "all", mono and code == 0, detail)


# optional criteria: need real checkpoints and a manifest of at least 20 images
PRETRAINED = os.environ.get("PWSTEGA_PRETRAINED") == "1" and os.environ.get("PWSTEGA_MANIFEST")
pretrained = pytest.mark.skipif(not PRETRAINED, reason="set PWSTEGA_PRETRAINED=1 and PWSTEGA_MANIFEST=<jsonl>")


@pytest.fixture(scope="module")
def real_report():
    from pwstega.evalkit import evaluate, load_manifest

    items = load_manifest(os.environ["PWSTEGA_MANIFEST"])
    assert len(items) >= 20, "optional criteria need at least 20 manifest items"
    return evaluate(items, StegoConfig(), os.environ.get("STEGA_PASSWORD", "acceptance-password"), degradations=("gaussian_blur", "jpeg"))


@pretrained
@pytest.mark.pretrained
def test_8_table_trends(acceptance, real_report):
    clean = real_report.aggregate["clean"]
    rec, enc, wrong = clean["recover-correct"]["psnr"], clean["encrypted"]["psnr"], clean["recover-wrong"]["psnr"]
    passed = abs(rec - 23.3) <= 2.0 and abs(enc - 18.6) <= 2.5 and rec - wrong >= 4
    assert acceptance("8 table trends", "all", passed, f"correct {rec:.2f}, encrypted {enc:.2f}, wrong {wrong:.2f} dB")


@pretrained
@pytest.mark.pretrained
def test_9_robustness(acceptance, real_report):
    agg = real_report.aggregate
    clean = agg["clean"]["recover-correct"]["psnr"]
    blur = agg["gaussian_blur"]["recover-correct"]["psnr"]
    jpeg = agg["jpeg"]["recover-correct"]["psnr"]
    blur_ok = abs(blur - (clean - (23.290 - 20.849))) <= 3
    jpeg_ok = abs(jpeg - (clean - (23.290 - 21.161))) <= 3
    assert acceptance("9 robustness", "all", blur_ok and jpeg_ok, f"clean {clean:.2f}, blur {blur:.2f}, jpeg {jpeg:.2f} dB")
