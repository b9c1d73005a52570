import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from pwstega.latentops import CoupledPair, NonFiniteLatent, as_latent, flip_pair, noise_flip
from pwstega.seedkit import derive_seed, generate_flip_mask


def test_flip_example():
    out = noise_flip(np.array([1.0, -2.0, 3.0, -4.0]), np.array([0, 1, 0, 1]))
    assert out.tolist() == [1.0, 2.0, 3.0, 4.0]


def test_zero_mask_identity(rng):
    x = rng.standard_normal((4, 8, 8)).astype(np.float32)
    mask = generate_flip_mask(derive_seed("pw", "noise-flip"), x.shape, 0.0)
    assert noise_flip(x, mask).tobytes() == x.tobytes()


def test_flip_shape_mismatch():
    mask = generate_flip_mask(derive_seed("pw", "noise-flip"), (4, 8, 8), 0.5)
    with pytest.raises(ValueError):
        noise_flip(np.zeros((4, 8, 9), np.float32), mask)


@settings(max_examples=100, deadline=None)
@given(
    x=hnp.arrays(np.float32, hnp.array_shapes(min_dims=1, max_dims=3, max_side=16), elements=st.floats(-1e6, 1e6, width=32)),
    eta=st.sampled_from([0.01, 0.05, 0.5, 1.0]),
    pw=st.text(min_size=1, max_size=8),
)
def test_flip_involution(x, eta, pw):
    mask = generate_flip_mask(derive_seed(pw, "noise-flip"), x.shape, eta)
    assert noise_flip(noise_flip(x, mask), mask).tobytes() == x.tobytes()


def test_flip_preserves_squares_and_mean_drift():
    rng = np.random.default_rng(0)
    drifts = []
    for i in range(1000):
        x = rng.standard_normal((4, 64, 64)).astype(np.float32)
        mask = generate_flip_mask(derive_seed(f"pw{i}", "noise-flip"), x.shape, 0.05)
        y = noise_flip(x, mask)
        assert np.array_equal(y * y, x * x)
        drifts.append(abs(float(y.mean()) - float(x.mean())))
    assert np.quantile(drifts, 0.99) < 0.05


def test_flip_pair_symmetric_and_involutive(rng):
    z = rng.standard_normal((4, 8, 8)).astype(np.float32)
    pair = CoupledPair.from_latent(z)
    mask = generate_flip_mask(derive_seed("pw", "noise-flip"), z.shape, 0.3)
    flipped = flip_pair(pair, mask)
    assert np.array_equal(flipped.x, flipped.y)
    back = flip_pair(flipped, mask)
    assert np.array_equal(back.x, z) and np.array_equal(back.y, z)
    ident = flip_pair(pair, generate_flip_mask(derive_seed("pw", "noise-flip"), z.shape, 0.0))
    assert np.array_equal(ident.x, z)


def test_flip_pair_uses_same_mask_on_both(rng):
    pair = CoupledPair(rng.standard_normal((2, 4, 4)).astype(np.float32), rng.standard_normal((2, 4, 4)).astype(np.float32))
    mask = generate_flip_mask(derive_seed("pw", "noise-flip"), (2, 4, 4), 0.5)
    out = flip_pair(pair, mask)
    assert np.array_equal(np.sign(out.x) * np.sign(pair.x), np.sign(out.y) * np.sign(pair.y))


def test_pair_validation():
    with pytest.raises(ValueError):
        CoupledPair(np.zeros((1, 2, 2), np.float32), np.zeros((1, 2, 3), np.float32))
    with pytest.raises(ValueError):
        CoupledPair(np.zeros((1, 2, 2), np.float32), np.zeros((1, 2, 2), np.float64))


def test_non_finite_rejected():
    with pytest.raises(NonFiniteLatent):
        as_latent(np.array([[[np.nan]]]))
    with pytest.raises(NonFiniteLatent):
        CoupledPair.from_latent(np.array([[[np.inf]]], np.float32))


def test_float64_escape_hatch():
    pair = CoupledPair.from_latent(np.zeros((1, 2, 2), np.float64))
    assert pair.dtype == np.float64
