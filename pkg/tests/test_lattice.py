"""Lattice arithmetic: folds, codebooks, dithers, exact group structure."""

from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from twinrelay.errors import GuardExceededError, ValidationError
from twinrelay.lattice import (
    CoarseLattice,
    NestedLatticePair,
    centered_units,
    diagnostics,
    dither_sample,
    encode_message,
    make_pair,
    mod_coarse,
    mod_units_exact,
    modulo_diff,
    modulo_sum,
    quantize_fine,
    systematic_generator,
    wrapped_sq_distances,
)

UNIT_CELL = CoarseLattice(n=1, q=4, gamma=1.0)  # cell [-2, 2)


def pair_q4() -> NestedLatticePair:
    return NestedLatticePair(coarse=UNIT_CELL, generator_matrix=[[1]])


def test_mod_coarse_examples():
    assert mod_coarse(np.array([5.0]), UNIT_CELL)[0] == 1.0
    assert mod_coarse(np.array([3.0]), UNIT_CELL)[0] == -1.0
    # half-open convention: the upper face folds to the lower face
    assert mod_coarse(np.array([2.0]), UNIT_CELL)[0] == -2.0
    assert mod_coarse(np.array([-2.0]), UNIT_CELL)[0] == -2.0


def test_mod_coarse_idempotent_and_in_range():
    rng = np.random.default_rng(0)
    coarse = CoarseLattice.for_power(n=6, q=5, power=2.5)
    x = rng.normal(0, 40.0, size=(500, 6))
    y = mod_coarse(x, coarse)
    half = coarse.cell / 2
    assert np.all(y >= -half) and np.all(y < half)
    assert np.array_equal(mod_coarse(y, coarse), y)


def test_mod_coarse_congruent_to_input():
    rng = np.random.default_rng(1)
    coarse = CoarseLattice(n=3, q=7, gamma=0.5)
    x = rng.normal(0, 30.0, size=(200, 3))
    y = mod_coarse(x, coarse)
    ratio = (x - y) / coarse.cell
    assert np.allclose(ratio, np.round(ratio), atol=1e-9)


def test_mod_distributive_float():
    rng = np.random.default_rng(2)
    coarse = CoarseLattice.for_power(n=4, q=4, power=1.0)
    for _ in range(200):
        a = rng.normal(0, 10, size=4)
        b = rng.normal(0, 10, size=4)
        lhs = mod_coarse(mod_coarse(a, coarse) + b, coarse)
        rhs = mod_coarse(a + b, coarse)
        assert np.allclose(lhs, rhs, atol=1e-12)


def test_mod_distributive_exact_rational():
    q = 4
    rng = np.random.default_rng(3)
    for _ in range(100):
        a = [Fraction(int(v), 64) for v in rng.integers(-4000, 4000, size=3)]
        b = [Fraction(int(v), 64) for v in rng.integers(-4000, 4000, size=3)]
        folded_a = mod_units_exact(a, q)
        lhs = mod_units_exact([x + y for x, y in zip(folded_a, b)], q)
        rhs = mod_units_exact([x + y for x, y in zip(a, b)], q)
        assert lhs == rhs


def test_mod_units_exact_range():
    vals = mod_units_exact([Fraction(7, 2), Fraction(-5, 3), 2, -2], 4)
    assert all(Fraction(-2) <= v < Fraction(2) for v in vals)
    assert vals[2] == Fraction(-2)  # upper face excluded


def test_quantizer_residual_in_cube():
    rng = np.random.default_rng(4)
    coarse = CoarseLattice(n=2, q=6, gamma=0.7)
    x = rng.normal(0, 15, size=(300, 2))
    resid = x - coarse.cell * np.round(x / coarse.cell)
    folded = mod_coarse(x, coarse)
    # round-based residual may sit on either face; the fold picks the lower one
    assert np.allclose(np.abs(resid), np.abs(folded), atol=1e-9)


def test_codebook_fold_q4():
    pair = pair_q4()
    assert pair.codebook_units.ravel().tolist() == [0, 1, -2, -1]
    assert [encode_message(i, pair).coords[0] for i in range(4)] == [0.0, 1.0, -2.0, -1.0]


def test_encode_zero_is_origin():
    pair = make_pair(n=3, q=5, k=2, power=1.0)
    assert np.all(encode_message(0, pair).coords == 0.0)


def test_encode_index_out_of_range():
    with pytest.raises(ValidationError):
        encode_message(4, pair_q4())


def test_encode_decode_roundtrip_exhaustive():
    pair = make_pair(n=3, q=5, k=2, power=1.0)
    for i in range(pair.size):
        point = encode_message(i, pair)
        assert pair.index_of_units(point.units) == i


def test_quantize_tie_prefers_lowest_index():
    pair = pair_q4()
    # x = 0.5 ties between codebook points 0.0 (index 0) and 1.0 (index 1)
    assert quantize_fine(np.array([0.5]), pair).index == 0


def test_quantize_matches_bruteforce_translate_search():
    rng = np.random.default_rng(5)
    pair = make_pair(n=2, q=4, k=1, power=1.0, generator_matrix=[[1, 2]])
    cell = pair.coarse.cell
    shifts = np.array(list(product((-1, 0, 1), repeat=2))) * cell
    for _ in range(200):
        x = rng.uniform(-cell / 2, cell / 2, size=2)
        best = None
        for idx, point in enumerate(pair.codebook_coords):
            for shift in shifts:
                d = float(np.sum((x - point - shift) ** 2))
                if best is None or d < best[0] - 1e-12:
                    best = (d, idx)
        assert quantize_fine(x, pair).index == best[1]


def test_quantize_fast_path_matches_generic():
    # full code (k = n) triggers the componentwise path; compare against
    # the generic wrapped-distance argmin
    pair = make_pair(n=2, q=4, k=2, power=1.0)
    rng = np.random.default_rng(6)
    cell = pair.coarse.cell
    for _ in range(100):
        x = rng.uniform(-cell / 2, cell / 2, size=2)
        generic = int(np.argmin(wrapped_sq_distances(x, pair)))
        assert quantize_fine(x, pair).index == generic


def test_modulo_sum_examples():
    pair = pair_q4()
    zero = encode_message(0, pair)
    one = encode_message(1, pair)
    assert modulo_sum(zero, one, pair).index == 1
    assert modulo_sum(one, one, pair).coords[0] == -2.0


def test_modulo_sum_bijection_q5():
    pair = make_pair(n=1, q=5, k=1, power=1.0)
    for a in range(5):
        pa = encode_message(a, pair)
        images = {modulo_sum(pa, encode_message(b, pair), pair).index for b in range(5)}
        assert images == set(range(5))


def test_modulo_diff_inverts_sum():
    pair = make_pair(n=2, q=5, k=1, power=1.0)
    for a in range(pair.size):
        for b in range(pair.size):
            pa, pb = encode_message(a, pair), encode_message(b, pair)
            s = modulo_sum(pa, pb, pair)
            assert modulo_diff(s, pa, pair).index == b
            assert modulo_diff(s, pb, pair).index == a


def test_codebook_closure_exhaustive():
    pair = make_pair(n=2, q=3, k=2, power=1.0)
    valid = set(range(pair.size))
    for a in range(pair.size):
        for b in range(pair.size):
            s = modulo_sum(encode_message(a, pair), encode_message(b, pair), pair)
            assert s.index in valid


@pytest.mark.parametrize("q,k,n", [
    (q, k, n)
    for q, k, n in product((2, 3, 5, 7), (1, 2), (1, 2, 3))
    if k <= n
])
def test_mod_sum_uniformity_exhaustive(q, k, n):
    """Sum of independent uniform codewords is exactly uniform, count-based."""
    pair = make_pair(n=n, q=q, k=k, power=1.0)
    counts = np.zeros(pair.size, dtype=np.int64)
    units = pair.codebook_units
    for a in range(pair.size):
        sums = centered_units(units[a][None, :] + units, q)
        for row in sums:
            counts[pair.index_of_units(row)] += 1
    assert np.all(counts == pair.size)


def test_dither_reproducible_and_in_cell():
    coarse = CoarseLattice.for_power(n=8, q=4, power=1.0)
    d1 = dither_sample(99, coarse)
    d2 = dither_sample(99, coarse)
    assert np.array_equal(d1.values, d2.values)
    assert d1.seed == 99
    half = coarse.cell / 2
    assert np.all(d1.values >= -half) and np.all(d1.values < half)
    assert not np.array_equal(d1.values, dither_sample(100, coarse).values)


def test_dither_moments():
    # components are iid, so one long vector gives 1e6 samples
    coarse = CoarseLattice.for_power(n=1_000_000, q=4, power=1.0)
    d = dither_sample(7, coarse)
    n = coarse.n
    cell = coarse.cell
    mean_bound = 3.0 * cell / np.sqrt(12.0 * n)
    assert abs(float(np.mean(d.values))) < mean_bound
    second = float(np.mean(d.values ** 2))
    assert abs(second - 1.0) < 0.01  # power P = 1 within 1%


def test_dithered_codeword_power():
    # (t - d) mod coarse is uniform over the cell, so its mean square is P
    pair = make_pair(n=4, q=4, k=2, power=1.0)
    rng = np.random.default_rng(8)
    samples = 20000
    total = 0.0
    half = pair.coarse.cell / 2
    for _ in range(samples):
        t = encode_message(int(rng.integers(pair.size)), pair)
        d = rng.uniform(-half, half, size=4)
        x = mod_coarse(t.coords - d, pair.coarse)
        total += float(np.mean(x ** 2))
    est = total / samples
    sem = np.sqrt(0.8 / (samples * 4))  # var of U^2 per component is 0.8 P^2
    assert abs(est - 1.0) < 3.0 * sem


def test_diagnostics_values():
    pair = make_pair(n=2, q=4, k=1, power=1.0)
    diag = diagnostics(pair, samples=500, seed=1)
    assert diag.second_moment == pytest.approx(1.0, abs=1e-12)
    assert diag.volume == pytest.approx(pair.coarse.cell ** 2, abs=1e-12)
    assert diag.normalized_second_moment == pytest.approx(1.0 / 12.0, abs=1e-12)
    assert diag.covering_radius_est >= diag.effective_radius * 0.5
    assert diag.covering_radius_est <= pair.coarse.cell  # inside one cell


def test_diagnostics_nsm_scale_invariant():
    for gamma in (0.3, 1.0, 2.7):
        pair = NestedLatticePair(
            coarse=CoarseLattice(n=3, q=5, gamma=gamma), generator_matrix=[[1, 1, 2]]
        )
        diag = diagnostics(pair, samples=50, seed=0)
        assert diag.normalized_second_moment == pytest.approx(1.0 / 12.0, rel=1e-12)


def test_enumeration_guard():
    with pytest.raises(GuardExceededError):
        make_pair(n=21, q=2, k=21, power=1.0)


def test_descriptor_roundtrip():
    pair = make_pair(n=4, q=16, k=2, power=1.0)
    desc = pair.to_descriptor()
    assert set(desc) == {"n", "q", "k", "generator", "power"}
    clone = NestedLatticePair.from_descriptor(desc)
    assert np.array_equal(clone.codebook_units, pair.codebook_units)
    assert clone.coarse.gamma == pytest.approx(pair.coarse.gamma, rel=1e-15)


def test_systematic_generator_rank():
    for q in (2, 4, 5, 16):
        G = systematic_generator(6, 3, q)
        pair = make_pair(n=6, q=q, k=3, power=1.0, generator_matrix=G)
        assert pair.size == q ** 3


def test_dimension_mismatch():
    with pytest.raises(ValidationError):
        mod_coarse(np.zeros(3), UNIT_CELL)
