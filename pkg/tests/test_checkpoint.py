"""Bit-exact checkpoint round trips and resumable training."""

import numpy as np
import pytest

from qbde.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from qbde.errors import SchemaError
from qbde.qgan import TrainConfig, train


def trained_state(tmp_path, epochs=4, seed=11):
    rng = np.random.default_rng(1)
    data = rng.dirichlet(np.ones(4), size=10)
    cfg = TrainConfig(batch=4, epochs=epochs, depth=2, seed=seed)
    return data, cfg, train(data, cfg).state


def test_round_trip_is_bit_exact(tmp_path):
    _, cfg, state = trained_state(tmp_path)
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, cfg, state)
    assert path.read_text().startswith(MAGIC)
    cfg2, state2 = load_checkpoint(path)
    assert cfg2 == cfg
    np.testing.assert_array_equal(state2.params.angles, state.params.angles)
    assert state2.params.entangler == state.params.entangler
    for a, b in zip(state2.net.param_list(), state.net.param_list()):
        np.testing.assert_array_equal(a, b)
    assert state2.epoch == state.epoch
    assert state2.opt_g.t == state.opt_g.t
    for a, b in zip(state2.opt_d.m, state.opt_d.m):
        np.testing.assert_array_equal(a, b)
    assert state2.rng.bit_generator.state == state.rng.bit_generator.state


def test_double_save_is_byte_identical(tmp_path):
    _, cfg, state = trained_state(tmp_path)
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(p1, cfg, state)
    save_checkpoint(p2, cfg, state)
    assert p1.read_bytes() == p2.read_bytes()


def test_resume_matches_uninterrupted_run(tmp_path):
    rng = np.random.default_rng(2)
    data = rng.dirichlet(np.ones(4), size=8)

    full = train(data, TrainConfig(batch=4, epochs=10, depth=2, seed=3))

    cfg_a = TrainConfig(batch=4, epochs=6, depth=2, seed=3)
    first = train(data, cfg_a)
    path = tmp_path / "part.ckpt"
    save_checkpoint(path, cfg_a, first.state)
    _, resumed_state = load_checkpoint(path)
    second = train(data, TrainConfig(batch=4, epochs=4, depth=2, seed=3),
                   state=resumed_state)

    assert first.loss_g + second.loss_g == full.loss_g
    assert first.loss_d + second.loss_d == full.loss_d
    assert first.cross_entropy + second.cross_entropy == full.cross_entropy
    np.testing.assert_array_equal(second.params.angles, full.params.angles)


def test_rejects_wrong_magic(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_text("some-other-format\n", encoding="utf-8")
    with pytest.raises(SchemaError):
        load_checkpoint(path)


def test_rejects_missing_fields(tmp_path):
    path = tmp_path / "trunc.ckpt"
    path.write_text(f"{MAGIC}\n[meta]\nepoch = 3\n", encoding="utf-8")
    with pytest.raises(SchemaError):
        load_checkpoint(path)


def test_missing_file_raises_io_error(tmp_path):
    with pytest.raises(OSError):
        load_checkpoint(tmp_path / "nope.ckpt")


def test_fresh_state_round_trip(tmp_path):
    # epoch 0, optimisers never stepped
    from qbde.qgan import init_train_state
    cfg = TrainConfig(depth=3, seed=5)
    state = init_train_state(2, cfg)
    path = tmp_path / "fresh.ckpt"
    save_checkpoint(path, cfg, state)
    _, back = load_checkpoint(path)
    assert back.opt_g.m is None
    np.testing.assert_array_equal(back.params.angles, state.params.angles)
