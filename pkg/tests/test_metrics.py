import numpy as np
import pytest

from iplan import data
from iplan.core import Boundary, Layout, RESOLUTION, Room, render_layout
from iplan.errors import DataError, ShapeError
from iplan.metrics import (
    CorpusFeatures,
    area_vector,
    fid_area,
    fid_img,
    fid_type,
    frechet_distance,
    grayscale_pool_features,
    type_vector,
)


@pytest.fixture(scope="module")
def corpus():
    return data.synth_corpus(12, rng=np.random.default_rng(77))


class TestFrechet:
    def test_identical_zero(self, corpus):
        feats = CorpusFeatures.from_vectors(
            "img", np.stack([grayscale_pool_features(render_layout(l)) for l in corpus])
        )
        assert frechet_distance(feats, feats) == pytest.approx(0.0, abs=1e-8)

    def test_unit_gaussians_shifted(self):
        a = CorpusFeatures.from_moments("x", [0.0], [[1.0]])
        b = CorpusFeatures.from_moments("x", [3.0], [[1.0]])
        assert frechet_distance(a, b) == pytest.approx(9.0, abs=1e-9)

    def test_diagonal_matches_per_dimension_formula(self):
        rng = np.random.default_rng(5)
        mu_a, mu_b = rng.normal(size=3), rng.normal(size=3)
        lam = rng.uniform(0.5, 2.0, 3)
        nu = rng.uniform(0.5, 2.0, 3)
        a = CorpusFeatures.from_moments("x", mu_a, np.diag(lam))
        b = CorpusFeatures.from_moments("x", mu_b, np.diag(nu))
        expected = float(
            ((mu_a - mu_b) ** 2).sum() + ((np.sqrt(lam) - np.sqrt(nu)) ** 2).sum()
        )
        assert frechet_distance(a, b) == pytest.approx(expected, rel=1e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(6)
        va = rng.normal(size=(30, 4))
        vb = rng.normal(size=(25, 4)) + 0.5
        a = CorpusFeatures.from_vectors("x", va)
        b = CorpusFeatures.from_vectors("x", vb)
        assert frechet_distance(a, b) == pytest.approx(frechet_distance(b, a), rel=1e-9)
        assert frechet_distance(a, b) >= 0

    def test_dim_mismatch(self):
        a = CorpusFeatures.from_moments("x", [0.0], [[1.0]])
        b = CorpusFeatures.from_moments("x", [0.0, 1.0], np.eye(2))
        with pytest.raises(ShapeError):
            frechet_distance(a, b)

    def test_shrinkage_keeps_self_distance_tiny(self):
        rng = np.random.default_rng(7)
        v = rng.normal(size=(5, 50))  # fewer samples than dimensions
        a = CorpusFeatures.from_vectors("x", v)
        assert frechet_distance(a, a) <= 1e-6


def _boundary():
    interior = np.zeros((RESOLUTION, RESOLUTION), dtype=np.uint8)
    interior[20:100, 20:100] = 1
    stroke = np.zeros_like(interior)
    stroke[19, 19:101] = 1
    stroke[100, 19:101] = 1
    stroke[19:101, 19] = 1
    stroke[19:101, 100] = 1
    return Boundary(
        boundary_mask=stroke, frontdoor_mask=np.zeros_like(stroke), interior_mask=interior
    )


class TestVectors:
    def test_area_vector_mean(self, registry):
        b = _boundary()
        bath = registry.index_of("bathroom")
        rooms = (
            Room(type_id=bath, center=(22, 22), box=(20, 20, 25, 25)),  # 5x5
            Room(type_id=bath, center=(42, 42), box=(40, 40, 45, 47)),  # 5x7
        )
        vec = area_vector(Layout(boundary=b, rooms=rooms), registry)
        assert vec[bath] == pytest.approx(30.0)
        assert vec.shape == (registry.size,)
        assert vec[registry.index_of("living")] == 0.0

    def test_type_vector_counts(self, corpus, registry):
        for layout in corpus:
            vec = type_vector(layout, registry)
            assert vec.sum() == layout.n_rooms
            assert np.array_equal(vec, layout.type_count(registry).to_array())

    def test_type_vector_order_invariant(self, registry):
        b = _boundary()
        rooms = (
            Room(type_id=0, center=(30, 30), box=(20, 20, 40, 40)),
            Room(type_id=1, center=(60, 60), box=(50, 50, 70, 70)),
        )
        l1 = Layout(boundary=b, rooms=rooms)
        l2 = Layout(boundary=b, rooms=rooms[::-1])
        assert np.array_equal(type_vector(l1, registry), type_vector(l2, registry))


class TestFidMetrics:
    def test_identity(self, corpus, registry):
        assert fid_img(corpus, corpus) == pytest.approx(0.0, abs=1e-6)
        assert fid_area(corpus, corpus, registry) == pytest.approx(0.0, abs=1e-6)
        assert fid_type(corpus, corpus, registry) == pytest.approx(0.0, abs=1e-6)

    def test_sensitivity_to_recolor(self, corpus):
        changed = []
        for layout in corpus:
            rooms = list(layout.rooms)
            room = rooms[0]
            rooms[0] = Room(type_id=(room.type_id + 1) % 6, center=room.center, box=room.box)
            changed.append(Layout(boundary=layout.boundary, rooms=tuple(rooms)))
        assert fid_img(corpus, changed) > 0

    def test_area_doubling_matches_independent_sqrtm(self, corpus, registry):
        # doubled areas shift the mean; cross-check the whole value against
        # an independently computed square root (Schur method via scipy)
        from scipy.linalg import sqrtm

        va = np.stack([area_vector(l, registry) for l in corpus])
        a = CorpusFeatures.from_vectors("area", va)
        b = CorpusFeatures.from_vectors("area", 2.0 * va)
        d = frechet_distance(a, b)
        diff = a.mu - b.mu
        cross = np.real(sqrtm(a.sigma @ b.sigma))
        expected = float(diff @ diff + np.trace(a.sigma + b.sigma - 2 * cross))
        assert d == pytest.approx(expected, rel=1e-6)
        assert d >= float(diff @ diff) * 0.5  # mean-shift dominated

    def test_general_case_matches_independent_sqrtm(self):
        from scipy.linalg import sqrtm

        rng = np.random.default_rng(17)
        for _ in range(5):
            va = rng.normal(size=(40, 5))
            vb = rng.normal(size=(35, 5)) @ rng.normal(size=(5, 5)) * 0.5 + 1.0
            a = CorpusFeatures.from_vectors("x", va)
            b = CorpusFeatures.from_vectors("x", vb)
            diff = a.mu - b.mu
            cross = np.real(sqrtm(a.sigma @ b.sigma))
            expected = float(diff @ diff + np.trace(a.sigma + b.sigma - 2 * cross))
            assert frechet_distance(a, b) == pytest.approx(expected, rel=1e-6)

    def test_noise_monotone(self, corpus):
        rng = np.random.default_rng(0)

        def noisy_extractor(level):
            def extract(img):
                noise = rng.uniform(-level, level, img.shape)
                return grayscale_pool_features(
                    np.clip(img.astype(np.float64) + noise, 0, 255).astype(np.uint8)
                )

            return extract

        values = []
        for level in (8.0, 32.0, 96.0):
            fa = CorpusFeatures.from_vectors(
                "img",
                np.stack([grayscale_pool_features(render_layout(l)) for l in corpus]),
            )
            fb = CorpusFeatures.from_vectors(
                "img", np.stack([noisy_extractor(level)(render_layout(l)) for l in corpus])
            )
            values.append(frechet_distance(fa, fb))
        assert values[0] < values[1] < values[2]

    def test_empty_corpus(self, corpus, registry):
        with pytest.raises(DataError):
            fid_img([], corpus)
