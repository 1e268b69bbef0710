"""Strategy registry and decision rules that don't need a full run."""

import pytest

from commitlotto.primitives import Rng
from commitlotto.strategies import (
    adversary_library,
    make_strategy,
    strategy_names,
    supports,
)

ALL = (
    "abort-at-commit",
    "abort-at-deposit",
    "abort-at-open",
    "abort-at-signing",
    "coalition",
    "force-timeout",
    "honest",
    "replay-commit",
    "selective-abort-open",
    "withhold-broadcast",
)


def test_registry_names_frozen():
    assert tuple(strategy_names()) == ALL


def test_adversary_library_excludes_honest():
    lib = adversary_library()
    assert len(lib) == 9
    names = [name for name, _ in lib]
    assert "honest" not in names
    assert sorted(names) == names
    for name, backends in lib:
        assert backends  # every adversary runs somewhere
        for backend in backends:
            assert supports(name, backend)


def test_supports_matrix():
    assert supports("honest", "ethereum")
    assert supports("honest", "bitcoin-plain")
    assert supports("abort-at-commit", "ethereum")
    assert not supports("abort-at-commit", "bitcoin-plain")  # no commit phase there
    assert not supports("force-timeout", "ethereum")
    assert not supports("replay-commit", "bitcoin-multiinput")
    assert not supports("honest", "solana")
    assert not supports("mystery", "ethereum")


def test_make_strategy_unknown_name():
    with pytest.raises(ValueError):
        make_strategy("mystery", 0, Rng("x"), {})


def test_make_strategy_builds_each_registered_name():
    shared = {}
    for name in strategy_names():
        s = make_strategy(name, 0, Rng(name), shared)
        assert s.player == 0
        assert s.name == name


def test_coalition_membership_accumulates_via_shared_dict():
    shared = {}
    members = [make_strategy("coalition", i, Rng(f"c{i}"), shared) for i in (1, 2, 3)]
    lone_honest = make_strategy("honest", 0, Rng("h"), shared)
    assert lone_honest.coalition_members() is None
    for s in members:
        assert s.coalition_members() == frozenset({1, 2, 3})
    # separate runs don't leak membership
    other = make_strategy("coalition", 5, Rng("c5"), {})
    assert other.coalition_members() == frozenset({5})


def test_coalition_throws_to_lowest_index():
    shared = {}
    s1 = make_strategy("coalition", 1, Rng("a"), shared)
    s2 = make_strategy("coalition", 2, Rng("b"), shared)
    assert s2._throws_to(1)  # internal match, higher index defers
    assert not s1._throws_to(2)  # the lower index plays to win
    assert not s2._throws_to(0)  # outsiders get an honest game
    assert not s2._throws_to(None)
