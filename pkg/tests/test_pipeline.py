"""Tests for `eazybandit.pipeline` module."""

from pathlib import Path
from typing import Callable, List, Optional, Union

import pytest

from eazybandit.core import BanditConfig
from eazybandit.events import ImpressionEvent, RewardEvent, TrainingExample
from eazybandit.exceptions import SchemaViolation, UnknownBandit
from eazybandit.pipeline import (
    BatchEmitter,
    BatchLog,
    EventLog,
    FlushPolicy,
    RewardPipeline,
    batch_bytes,
    emit_batches,
    join_window,
    replay,
    validate_event,
)
from eazybandit.simulator import BernoulliArms, GeometricDelay, PipelineParams, run_experiment
from eazybandit.store import FileBanditStore, StoreConfig

ConfigFactory = Callable[..., BanditConfig]


def _impression(
    request_id: str, timestamp: float, arm: Union[str, List[str]] = "a"
) -> ImpressionEvent:
    return ImpressionEvent(
        bandit_id="hero",
        request_id=request_id,
        session_id="s",
        arm=arm,
        context=[1.0],
        param_version=0,
        timestamp=timestamp,
    )


def _reward(
    request_id: str,
    timestamp: float,
    value: float = 1.0,
    click_position: Optional[int] = None,
) -> RewardEvent:
    return RewardEvent(
        bandit_id="hero",
        request_id=request_id,
        values=[value],
        click_position=click_position,
        timestamp=timestamp,
    )


def _examples(n: int) -> List[TrainingExample]:
    return [
        TrainingExample(request_id=f"r{i}", context=[1.0], arm="a", reward=[1.0], timestamp=0.0)
        for i in range(n)
    ]


# ------------------------------------------
# Test cases for validate_event() and EventLog
# ------------------------------------------


def test_validate_event_binary_reward(make_config: ConfigFactory) -> None:
    """Test that binary bandits only take 0 and 1."""
    validate_event(make_config(), _reward("r1", 0.0, 1.0))
    with pytest.raises(SchemaViolation):
        validate_event(make_config(), _reward("r1", 0.0, 0.5))


@pytest.mark.parametrize(
    "event",
    [
        _impression("r1", 0.0, arm="z"),
        _impression("r1", 0.0, arm=["a", "b"]),
        _impression("r1", float("inf")),
        _reward("r1", 0.0, click_position=0),
    ],
)
def test_validate_event_rejects(
    make_config: ConfigFactory, event: Union[ImpressionEvent, RewardEvent]
) -> None:
    """Test unknown arms, rankings, timestamps and click positions."""
    with pytest.raises(SchemaViolation):
        validate_event(make_config(), event)


def test_event_log_offsets(
    store: FileBanditStore, make_config: ConfigFactory, tmp_path: Path
) -> None:
    """Test offsets per file and the merged event order."""
    store.put_config(make_config())
    log = EventLog(tmp_path / "logs", store.get_config)
    assert log.append(_impression("r1", 5.0)) == 0
    assert log.append(_reward("r1", 5.0)) == 0
    assert log.append(_impression("r2", 3.0)) == 1
    assert [(e.kind, e.request_id) for e in log.events("hero")] == [
        ("impression", "r2"),
        ("impression", "r1"),
        ("reward", "r1"),
    ]


def test_event_log_rejects_unknown_bandit(store: FileBanditStore, tmp_path: Path) -> None:
    """Test events for bandits the store does not know."""
    log = EventLog(tmp_path / "logs", store.get_config)
    with pytest.raises(UnknownBandit):
        log.append(_impression("r1", 0.0))


# ------------------------------------------
# Test cases for join_window()
# ------------------------------------------


def test_join_reward_in_window(make_config: ConfigFactory) -> None:
    """Test that a reward inside the window is attached."""
    events = [_impression("r1", 0.0), _reward("r1", 60.0), _impression("r2", 100.0)]
    examples, counters = join_window(make_config(), events, flush=False)
    assert [(e.request_id, e.reward) for e in examples] == [("r1", [1.0])]
    assert (counters.impressions, counters.examples, counters.late_rewards) == (2, 1, 0)


def test_join_late_reward(make_config: ConfigFactory) -> None:
    """Test that a reward after the window is discarded and counted."""
    examples, counters = join_window(make_config(), [_impression("r1", 0.0), _reward("r1", 61.0)])
    assert examples[0].reward == [0.0]
    assert counters.late_rewards == 1


def test_join_unknown_request(make_config: ConfigFactory) -> None:
    """Test rewards without an impression."""
    examples, counters = join_window(make_config(), [_reward("ghost", 1.0)])
    assert examples == []
    assert counters.late_rewards == 1


def test_join_binary_rewards_aggregate_with_or(make_config: ConfigFactory) -> None:
    """Test that any success makes a binary reward 1."""
    events = [_impression("r1", 0.0), _reward("r1", 1.0, 1.0), _reward("r1", 2.0, 0.0)]
    examples, _ = join_window(make_config(), events)
    assert examples[0].reward == [1.0]


def test_join_duplicate_impression(make_config: ConfigFactory) -> None:
    """Test that the first impression of a request keeps its rewards."""
    events = [
        _impression("r1", 0.0, arm="a"),
        _reward("r1", 1.0),
        _impression("r1", 2.0, arm="b"),
    ]
    examples, counters = join_window(make_config(), events)
    assert [(e.arm, e.reward, e.timestamp) for e in examples] == [("a", [1.0], 0.0)]
    assert (counters.impressions, counters.duplicate_impressions) == (1, 1)
    assert counters.impressions == counters.examples + counters.dropped_examples


def test_join_continuous_rewards_sum(make_config: ConfigFactory) -> None:
    """Test summed continuous rewards and dropped silent impressions."""
    config = make_config(algorithm="LinearTS", reward="Continuous")
    events = [
        _impression("r1", 0.0),
        _impression("r2", 0.0),
        _reward("r1", 1.0, 0.5),
        _reward("r1", 2.0, 0.25),
    ]
    examples, counters = join_window(config, events)
    assert [(e.request_id, e.reward) for e in examples] == [("r1", [0.75])]
    assert counters.dropped_examples == 1
    assert counters.impressions == counters.examples + counters.dropped_examples


def test_join_rankings(make_config: ConfigFactory) -> None:
    """Test the no-click default and that the first click wins."""
    config = make_config(
        algorithm="CascadeTS", arms=["a", "b", "c"], hyperparameters={"ranking_k": 2}
    )
    events = [
        _impression("r1", 0.0, ["a", "b"]),
        _impression("r2", 0.0, ["b", "c"]),
        _reward("r2", 1.0, click_position=1),
        _reward("r2", 2.0, click_position=0),
    ]
    examples, _ = join_window(config, events)
    by_id = {e.request_id: e for e in examples}
    assert (by_id["r1"].reward, by_id["r1"].click_position) == ([0.0], None)
    assert (by_id["r2"].reward, by_id["r2"].click_position) == ([1.0], 1)
    assert by_id["r2"].arm == ["b", "c"]


# ------------------------------------------
# Test cases for batch emission
# ------------------------------------------


def test_emit_batches_by_size() -> None:
    """Test 250 examples against a batch size of 100."""
    timed = [(0.0, example) for example in _examples(250)]
    batches = list(emit_batches("hero", timed, FlushPolicy(max_examples=100), start_seq=7))
    assert [(b.seq, len(b.examples)) for b in batches] == [(7, 100), (8, 100), (9, 50)]
    assert [e.request_id for b in batches for e in b.examples] == [f"r{i}" for i in range(250)]


def test_emit_batches_without_examples() -> None:
    """Test that no empty batch is ever cut."""
    assert list(emit_batches("hero", [], FlushPolicy())) == []


def test_batch_emitter_max_wait() -> None:
    """Test that a lone example is cut once it has waited long enough."""
    emitter = BatchEmitter("hero", FlushPolicy(max_examples=100, max_wait=5.0))
    assert emitter.add(_examples(1), 10.0) == []
    assert emitter.tick(14.0) == []
    (batch,) = emitter.tick(15.0)
    assert (batch.seq, len(batch.examples), batch.window) == (1, 1, (10.0, 15.0))
    assert emitter.tick(100.0) == []


def test_reward_pipeline(make_config: ConfigFactory) -> None:
    """Test the join and batching stages together."""
    pipeline = RewardPipeline(make_config(), FlushPolicy(max_examples=2), start_seq=3)
    assert pipeline.process(_impression("r1", 0.0)) == []
    assert pipeline.process(_impression("r2", 1.0)) == []
    assert pipeline.process(_reward("r1", 2.0)) == []
    (batch,) = pipeline.advance(62.0)
    assert batch.seq == 3
    assert [e.reward for e in batch.examples] == [[1.0], [0.0]]
    assert pipeline.close() == []


def test_batch_log(tmp_path: Path) -> None:
    """Test that batches survive the batch log."""
    log = BatchLog(tmp_path, "hero")
    (batch,) = emit_batches("hero", [(0.0, e) for e in _examples(3)], FlushPolicy())
    assert log.append(batch) == 0
    assert [(offset, b) for offset, b in log.read_from()] == [(0, batch)]


# ------------------------------------------
# Test cases for replay()
# ------------------------------------------


def test_replay_reproduces_logged_batches(make_config: ConfigFactory, tmp_path: Path) -> None:
    """Test that replaying a run's logs yields byte-identical batches."""
    config = make_config(arms=["a0", "a1"])
    env = BernoulliArms(means=[0.7, 0.3], delay=GeometricDelay(p=0.2))
    policy = FlushPolicy(max_examples=20, max_wait=30.0)
    report = run_experiment(
        config, env, 500, seed=3, params=PipelineParams(flush_policy=policy), data_dir=tmp_path
    )

    store = FileBanditStore(config=StoreConfig(root=tmp_path / "store", fsync=False))
    log = EventLog(tmp_path / "logs", store.get_config)
    batches, counters = replay(log, store.get_config("hero"), policy)
    logged = [batch for _, batch in BatchLog(tmp_path / "logs", "hero").read_from()]
    assert batch_bytes(batches) == batch_bytes(logged)
    assert len(batches) == report.counters["batches"] == report.train_seq
    assert counters.impressions == 500 == counters.examples + counters.dropped_examples


def test_replay_without_logs(
    store: FileBanditStore, make_config: ConfigFactory, tmp_path: Path
) -> None:
    """Test replaying a bandit that never served a decision."""
    store.put_config(make_config())
    with pytest.raises(UnknownBandit):
        replay(EventLog(tmp_path / "logs", store.get_config), make_config(), FlushPolicy())
