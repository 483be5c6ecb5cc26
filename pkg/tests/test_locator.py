import numpy as np
import pytest
import torch

from iplan import data, locator
from iplan.core import RESOLUTION
from iplan.errors import DataError, DomainError, NoFreeSpace, RegistryError, ShapeError


@pytest.fixture(scope="module")
def corpus():
    return data.synth_corpus(3, rng=np.random.default_rng(51))


@pytest.fixture(scope="module")
def net(registry):
    torch.manual_seed(2)
    return locator.CenterLocator(registry.size).eval()


class TestBuildState:
    def test_empty_placements(self, corpus, registry):
        state = locator.build_state(corpus[0].boundary, [], registry)
        assert state.shape == (registry.size + 4, RESOLUTION, RESOLUTION)
        assert state[3:].sum() == 0
        assert np.array_equal(state[0], corpus[0].boundary.boundary_mask)
        assert np.array_equal(state[2], corpus[0].boundary.interior_mask)

    def test_single_stamp_and_summary(self, corpus, registry):
        state = locator.build_state(corpus[0].boundary, [(1, (64, 64))], registry)
        assert state[3 + 1].sum() == 81
        assert np.array_equal(state[3 + registry.size], state[3 + 1])

    def test_permutation_invariant(self, corpus, registry):
        placed = [(0, (40, 40)), (1, (80, 80)), (3, (60, 30))]
        a = locator.build_state(corpus[0].boundary, placed, registry)
        b = locator.build_state(corpus[0].boundary, placed[::-1], registry)
        assert np.array_equal(a, b)

    def test_summary_is_or_of_type_channels(self, corpus, registry):
        rng = np.random.default_rng(6)
        for _ in range(20):
            placed = [
                (int(rng.integers(registry.size)), (int(rng.integers(128)), int(rng.integers(128))))
                for _ in range(int(rng.integers(0, 5)))
            ]
            state = locator.build_state(corpus[0].boundary, placed, registry)
            expected = state[3 : 3 + registry.size].max(axis=0)
            assert np.array_equal(state[3 + registry.size], expected)
            assert set(np.unique(state)) <= {0.0, 1.0}

    def test_bad_type_id(self, corpus, registry):
        with pytest.raises(RegistryError):
            locator.build_state(corpus[0].boundary, [(99, (64, 64))], registry)


class TestForward:
    def test_output_shape_and_determinism(self, net, corpus, registry):
        state = locator.build_state(corpus[0].boundary, [], registry)
        a = locator.locator_forward(net, state, 0)
        b = locator.locator_forward(net, state, 0)
        assert a.shape == (registry.size + 3, RESOLUTION, RESOLUTION)
        assert np.array_equal(a, b)

    def test_zero_state_finite(self, net, registry):
        state = np.zeros((registry.size + 4, RESOLUTION, RESOLUTION), dtype=np.float32)
        out = locator.locator_forward(net, state, 0)
        assert np.isfinite(out).all()

    def test_shape_error(self, net):
        with pytest.raises(ShapeError):
            locator.locator_forward(net, np.zeros((2, 128, 128), dtype=np.float32), 0)


class TestLoss:
    def test_weights(self, registry):
        w = locator.class_weights(registry.size)
        assert (w[: registry.size] == 2.0).all()
        assert (w[registry.size :] == 1.25).all()

    def test_uniform_logits_closed_form(self, registry):
        k = registry.size
        h = w = 8
        logits = torch.zeros(k + 3, h, w)
        rng = np.random.default_rng(0)
        target = torch.tensor(rng.integers(0, k + 3, size=(h, w)))
        loss = locator.locator_loss(logits, target, k).item()
        weights = locator.class_weights(k).numpy()
        expected = sum(
            weights[t] * np.log(k + 3) for t in target.numpy().reshape(-1)
        )
        assert loss == pytest.approx(expected, rel=1e-6)

    def test_confident_limit(self, registry):
        k = registry.size
        target = torch.zeros(4, 4, dtype=torch.int64)
        logits = torch.full((k + 3, 4, 4), -100.0)
        logits[0] = 100.0
        assert locator.locator_loss(logits, target, k).item() == pytest.approx(0.0, abs=1e-6)

    def test_label_out_of_range(self, registry):
        k = registry.size
        logits = torch.zeros(k + 3, 2, 2)
        target = torch.full((2, 2), k + 3, dtype=torch.int64)
        with pytest.raises(DomainError):
            locator.locator_loss(logits, target, k)


class TestTrainingExample:
    def test_single_room_layout(self, registry):
        layout = data.synth_corpus(1, rng=np.random.default_rng(99))[0]
        one_room = type(layout)(boundary=layout.boundary, rooms=layout.rooms[:1])
        state, next_type, target = locator.make_training_example(
            one_room, registry, np.random.default_rng(0)
        )
        assert state[3:].sum() == 0  # nothing kept
        assert next_type == one_room.rooms[0].type_id
        assert (target == next_type).sum() > 0

    def test_keep_all_but_one(self, corpus, registry):
        layout = corpus[0]
        rng = np.random.default_rng(1)
        for _ in range(50):
            state, next_type, target = locator.make_training_example(layout, registry, rng)
            kept = int(state[3 + registry.size].sum() > 0)
            type_labels = (target < registry.size).sum()
            assert type_labels > 0  # exactly one next-room stamp carries a type
            assert next_type < registry.size

    def test_target_label_regions(self, corpus, registry):
        layout = corpus[0]
        k = registry.size
        state, next_type, target = locator.make_training_example(
            layout, registry, np.random.default_rng(2)
        )
        outside = target == locator.label_outside(k)
        interior = layout.boundary.interior_mask == 1
        # everything outside the interior is OUTSIDE unless stamped
        stamped = (target < k) | (target == locator.label_existing(k))
        assert (outside | interior.astype(bool) | stamped).all()

    def test_next_room_uniform_given_subset_size(self, registry):
        # with synth min_side 16, center stamps never overlap or clip, so the
        # summary channel counts kept rooms exactly and the next room is the
        # unique one whose center pixel carries a type label
        rng = np.random.default_rng(3)
        corpus4 = [
            l for l in data.synth_corpus(40, rng=np.random.default_rng(77)) if l.n_rooms == 4
        ]
        layout = corpus4[0]
        counts = {i: 0 for i in range(4)}
        hits = 0
        for _ in range(10_000):
            state, next_type, target = locator.make_training_example(layout, registry, rng)
            kept = int(round(state[3 + registry.size].sum() / 81))
            if kept != 3:
                continue
            for i, room in enumerate(layout.rooms):
                if target[room.center] == room.type_id:
                    counts[i] += 1
                    hits += 1
                    break
        assert hits > 1500
        for i in range(4):
            assert abs(counts[i] / hits - 0.25) < 0.02


class TestPredictCenter:
    def test_always_interior(self, net, corpus, registry):
        layout = corpus[0]
        state = locator.build_state(layout.boundary, [], registry)
        for mode in ("argmax", "sample"):
            center = locator.predict_center(
                net, state, 0, mode=mode, rng=np.random.default_rng(0)
            )
            assert layout.boundary.interior_mask[center] == 1

    def test_sampling_reproducible(self, net, corpus, registry):
        state = locator.build_state(corpus[0].boundary, [], registry)
        a = locator.predict_center(net, state, 0, mode="sample", rng=np.random.default_rng(9))
        b = locator.predict_center(net, state, 0, mode="sample", rng=np.random.default_rng(9))
        assert a == b

    def test_no_free_space(self, net, registry):
        state = np.zeros((registry.size + 4, RESOLUTION, RESOLUTION), dtype=np.float32)
        with pytest.raises(NoFreeSpace):
            locator.predict_center(net, state, 0)

    def test_unknown_mode(self, net, corpus, registry):
        state = locator.build_state(corpus[0].boundary, [], registry)
        with pytest.raises(DomainError):
            locator.predict_center(net, state, 0, mode="beam")


class TestLocateAll:
    def test_length_matches_types(self, net, corpus, registry):
        types = [0, 1, 3]
        centers = locator.locate_all(
            net, corpus[0].boundary, types, registry, rng=np.random.default_rng(0)
        )
        assert len(centers) == 3

    def test_single_type_equals_predict(self, net, corpus, registry):
        state = locator.build_state(corpus[0].boundary, [], registry)
        direct = locator.predict_center(net, state, 2, mode="argmax")
        chained = locator.locate_all(net, corpus[0].boundary, [2], registry, mode="argmax")
        assert chained == [direct]

    def test_edit_at_step_preserves_prefix(self, net, corpus, registry):
        types = [0, 1, 3, 2]
        plain = locator.locate_all(net, corpus[0].boundary, types, registry, mode="argmax")
        rows, cols = np.nonzero(corpus[0].boundary.interior_mask)
        override = (int(rows[0]), int(cols[0]))

        def edit(j, type_id, center):
            return override if j == 2 else None

        edited = locator.locate_all(
            net, corpus[0].boundary, types, registry, mode="argmax", edits=edit
        )
        assert edited[:2] == plain[:2]
        assert edited[2] == override

    def test_markov_replay_from_snapshot(self, net, corpus, registry):
        types = [0, 1, 3, 2]
        full = locator.locate_all(net, corpus[0].boundary, types, registry, mode="argmax")
        # rebuild the chain from the state after two placements
        placed = list(zip(types[:2], full[:2]))
        state = locator.build_state(corpus[0].boundary, placed, registry)
        resumed = locator.predict_center(net, state, types[2], mode="argmax")
        assert resumed == full[2]

    def test_empty_types(self, net, corpus, registry):
        with pytest.raises(DataError):
            locator.locate_all(net, corpus[0].boundary, [], registry)


class TestCheckpoint:
    def test_roundtrip_and_k_mismatch(self, corpus, registry, tmp_path):
        cfg = locator.LocatorConfig(steps=2, batch_size=2)
        net, _ = locator.train_locator(corpus, registry, cfg, np.random.default_rng(0))
        path = tmp_path / "locator.pt"
        locator.save_checkpoint(net, registry, path)
        loaded = locator.load_checkpoint(path, registry)
        state = locator.build_state(corpus[0].boundary, [], registry)
        assert np.allclose(
            locator.locator_forward(net, state, 0), locator.locator_forward(loaded, state, 0)
        )
        from iplan.core import RoomTypeRegistry

        other = RoomTypeRegistry(names=("x", "y"), max_counts=(1, 1))
        with pytest.raises(RegistryError):
            locator.load_checkpoint(path, other)
