import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splitlv import IncompatibleStepError, LevelTooLargeError
from splitlv.brownian import (
    dump_path,
    generate_path,
    increment_between,
    load_path,
    path_layout,
    step_increments,
    step_level,
    steps_for,
)


@pytest.fixture(scope="module")
def path():
    return generate_path(7, 3, 1.0, 10, 2)


def test_same_key_is_bit_identical():
    a = generate_path(123, 4, 1.0, 8, 3)
    b = generate_path(123, 4, 1.0, 8, 3)
    assert a.increments.tobytes() == b.increments.tobytes()


def test_generation_order_does_not_matter():
    first = [generate_path(9, k, 2.0, 6, 1).increments for k in range(5)]
    rev = [generate_path(9, k, 2.0, 6, 1).increments for k in reversed(range(5))][::-1]
    for a, b in zip(first, rev):
        assert a.tobytes() == b.tobytes()


def test_distinct_streams():
    a = generate_path(123, 4, 1.0, 8, 1)
    b = generate_path(123, 5, 1.0, 8, 1)
    c = generate_path(124, 4, 1.0, 8, 1)
    assert not np.array_equal(a.increments, b.increments)
    assert not np.array_equal(a.increments, c.increments)


def test_fine_variance_within_five_standard_errors():
    L, T = 16, 1.0
    path = generate_path(2024, 0, T, L, 2)
    n = 1 << L
    delta = T / n
    # for normal samples Var(s^2) = 2 sigma^4 / (n - 1)
    se = delta * np.sqrt(2.0 / (n - 1))
    var = path.increments.var(axis=0, ddof=1)
    assert np.all(np.abs(var - delta) < 5 * se)
    assert path.fine_step == delta


def test_terminal_value_statistics():
    T, n = 1.0, 10_000
    wt = np.array([generate_path(31, k, T, 1, 2).terminal_value() for k in range(n)])
    assert np.all(np.abs(wt.mean(axis=0)) < 4 * np.sqrt(T / n))
    assert np.all(np.abs(wt.var(axis=0, ddof=1) - T) < 0.1 * T)


def test_increment_edge_cases(path):
    np.testing.assert_array_equal(increment_between(path, 5, 5), np.zeros(2))
    np.testing.assert_array_equal(increment_between(path, 0, path.n_cells), path.terminal_value())
    np.testing.assert_array_equal(increment_between(path, 0, 4), increment_between(path, 0, 2) + increment_between(path, 2, 4))
    with pytest.raises(IndexError):
        increment_between(path, 3, 2)
    with pytest.raises(IndexError):
        increment_between(path, 0, path.n_cells + 1)


def _pairwise(a):
    while a.shape[0] > 1:
        a = a[0::2] + a[1::2]
    return a[0]


def test_pyramid_root_against_pairwise_oracle(path):
    np.testing.assert_array_equal(path.terminal_value(), _pairwise(path.increments.copy()))
    np.testing.assert_allclose(path.terminal_value(), path.increments.sum(axis=0), rtol=1e-12, atol=1e-13)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10), st.data())
def test_dyadic_halves_add_exactly(k, data):
    path = generate_path(11, 0, 1.0, 10, 2)
    size = 1 << k
    blk = data.draw(st.integers(0, path.n_cells // size - 1))
    a, b = blk * size, (blk + 1) * size
    c = a + size // 2
    whole = increment_between(path, a, b)
    assert np.array_equal(whole, increment_between(path, a, c) + increment_between(path, c, b))
    np.testing.assert_array_equal(whole, path.blocks(k)[blk])


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_arbitrary_interval_matches_fine_sum(data):
    path = generate_path(12, 1, 1.0, 9, 1)
    i_a = data.draw(st.integers(0, path.n_cells))
    i_b = data.draw(st.integers(i_a, path.n_cells))
    np.testing.assert_allclose(increment_between(path, i_a, i_b), path.increments[i_a:i_b].sum(axis=0), atol=1e-13)


def test_path_is_read_only(path):
    with pytest.raises(ValueError):
        path.increments[0, 0] = 1.0


def test_steps_for_examples():
    path = generate_path(0, 0, 1.0, 3, 1)
    steps = steps_for(path, 0.5)
    assert len(steps) == 2
    assert [s.mid for s in steps] == [2, 6]
    assert steps[0].start == 0 and steps[-1].end == 8
    assert all(a.end == b.start for a, b in zip(steps, steps[1:]))
    with pytest.raises(IncompatibleStepError, match="incompatible step size"):
        steps_for(path, 1 / 3)
    with pytest.raises(IncompatibleStepError):
        steps_for(path, 1 / 8)


def test_step_increments_match_schedule(path):
    h = 2.0**-5
    full, first, second = step_increments(path, h)
    for n, s in enumerate(steps_for(path, h)):
        np.testing.assert_array_equal(full[n], increment_between(path, s.start, s.end))
        np.testing.assert_array_equal(first[n], increment_between(path, s.start, s.mid))
        np.testing.assert_array_equal(second[n], increment_between(path, s.mid, s.end))
        assert np.array_equal(full[n], first[n] + second[n])


def test_step_increments_partial_horizon():
    path = generate_path(0, 0, 16.0, 8, 1)
    full, _, _ = step_increments(path, 0.25, t_end=10.0)
    assert full.shape == (40, 1)
    with pytest.raises(IncompatibleStepError):
        step_increments(path, 0.25, t_end=10.1)


def test_step_level():
    assert step_level(1.0, 2.0**-6) == 6
    assert step_level(16.0, 2.0**-6) == 10
    for bad in (0.3, 2.0, 0.0, -0.5):
        with pytest.raises(IncompatibleStepError):
            step_level(1.0, bad)


def test_path_layout():
    assert path_layout(1.0, 2.0**-12) == (1.0, 13)
    assert path_layout(10.0, 2.0**-10) == (16.0, 15)
    with pytest.raises(IncompatibleStepError):
        path_layout(10.0, 3.0)


def test_generation_errors():
    with pytest.raises(LevelTooLargeError, match="level too large"):
        generate_path(0, 0, 1.0, 63, 1)
    for args in ((0, 0, 0.0, 4, 1), (0, 0, 1.0, 0, 1), (0, 0, 1.0, 4, 0), (-1, 0, 1.0, 4, 1), (0, 2**63, 1.0, 4, 1)):
        with pytest.raises(ValueError):
            generate_path(*args)


def test_dump_round_trip(path):
    buf = io.BytesIO()
    dump_path(path, buf)
    raw = buf.getvalue()
    assert len(raw) == 40 + 8 * path.n_cells * path.m
    assert raw[40:48] == path.increments[0, 0].tobytes()
    buf.seek(0)
    back = load_path(buf)
    assert (back.horizon, back.level, back.m, back.key) == (path.horizon, path.level, path.m, path.key)
    assert back.increments.tobytes() == path.increments.tobytes()
    np.testing.assert_array_equal(back.terminal_value(), path.terminal_value())


def test_load_truncated():
    buf = io.BytesIO()
    dump_path(generate_path(1, 1, 1.0, 4, 1), buf)
    with pytest.raises(ValueError):
        load_path(io.BytesIO(buf.getvalue()[:-8]))
