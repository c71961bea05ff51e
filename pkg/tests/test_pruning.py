import pytest
from hypothesis import given, strategies as st

from stairprune.errors import RangeError, ValidationError
from stairprune.model import make_layer_spec
from stairprune.pruning import PruneRequest, prune_channels, reindex_channels, sweep_configs


@pytest.fixture
def base():
    return make_layer_spec("l", 64, 128, 3, input_h=28, padding=1)


def test_prune_one_channel(base):
    out = prune_channels(PruneRequest(base, {25}))
    assert out.out_channels == 127
    assert out.in_channels == base.in_channels and out.output_shape == base.output_shape


def test_reindex_shifts_later_channels_down():
    mapping = reindex_channels(128, {25})
    assert mapping[24] == 24 and mapping[26] == 25 and mapping[128] == 127
    assert sorted(mapping.values()) == list(range(1, 128))


def test_empty_prune_is_identity(base):
    assert prune_channels(PruneRequest(base, set())) == base


def test_which_channels_does_not_matter(base):
    assert prune_channels(PruneRequest(base, {1, 64, 128})) == prune_channels(PruneRequest(base, {2, 3, 4}))


@pytest.mark.parametrize("indices", [{0}, {129}, set(range(1, 129))])
def test_invalid_requests(base, indices):
    with pytest.raises(ValidationError):
        PruneRequest(base, indices)


def test_duplicates_rejected(base):
    with pytest.raises(ValidationError):
        PruneRequest(base, [3, 3])


@given(n=st.integers(1, 300), data=st.data())
def test_reindex_is_contiguous(n, data):
    pruned = data.draw(st.sets(st.integers(1, n), max_size=n - 1))
    mapping = reindex_channels(n, pruned)
    assert list(mapping.values()) == list(range(1, n - len(pruned) + 1))
    assert set(mapping) == set(range(1, n + 1)) - pruned


def test_full_sweep(base):
    configs = sweep_configs(base, 1, 1)
    assert [c.out_channels for c in configs] == list(range(128, 0, -1))


def test_degenerate_sweep(base):
    assert [c.out_channels for c in sweep_configs(base, 128, 1)] == [128]


def test_stepped_sweep():
    base = make_layer_spec("l", 1, 10, 1, input_h=1)
    assert [c.out_channels for c in sweep_configs(base, 4, 3)] == [10, 7, 4]


@pytest.mark.parametrize("min_channels, step", [(129, 1), (0, 1), (1, 0)])
def test_sweep_range_errors(base, min_channels, step):
    with pytest.raises(RangeError):
        sweep_configs(base, min_channels, step)
