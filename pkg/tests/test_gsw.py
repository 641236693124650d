import math

import numpy as np
import pytest

import pottsgibbs as pg

from oracles import (exact_partition_posterior, set_partitions,
                     single_site_reference_sampler, tv_distance)


class TestZeta:
    def test_kappa_zero_kills_all_bonds(self):
        cfg = pg.GswConfig(kappa=0.0, tau=2.0, beta_hat=np.arange(4.0))
        assert pg.zeta(cfg, 0, 1) == 0.0

    def test_classical_sw_limit(self):
        cfg = pg.GswConfig(kappa=1.0, tau=0.0)
        assert pg.zeta(cfg, 0, 1) == 1.0

    def test_halving_at_log_two_gap(self):
        bh = np.array([0.0, math.log(2)])
        cfg = pg.GswConfig(kappa=1.0, tau=1.0, beta_hat=bh)
        assert pg.zeta(cfg, 0, 1) == pytest.approx(0.5, abs=1e-15)

    def test_bounded_by_kappa(self):
        rng = np.random.default_rng(0)
        bh = rng.standard_normal(16)
        cfg = pg.GswConfig(kappa=0.8, tau=0.7, beta_hat=bh)
        lat = pg.build_lattice(4, 4)
        zt = pg.zeta_table(cfg, lat)
        assert np.all(zt >= 0) and np.all(zt <= 0.8)

    def test_validation(self):
        with pytest.raises(ValueError):
            pg.GswConfig(kappa=1.5)
        with pytest.raises(ValueError):
            pg.GswConfig(tau=-1.0)
        with pytest.raises(ValueError):
            pg.GswConfig(h=0)


class TestSampleBonds:
    def test_cross_cluster_probability_zero(self):
        lat = pg.build_lattice(2, 2, 5.0)
        st = pg.PartitionState([0, 1, 2, 3])
        cfg = pg.GswConfig(kappa=1.0, tau=0.0)
        rng = np.random.default_rng(0)
        for _ in range(200):
            bonds = pg.sample_bonds(lat, st, cfg, rng)
            assert bonds.n_bonds == 0

    def test_bond_frequency_matches_formula(self):
        # ups=1, zeta=1, same labels: P(r=1) = 1 - exp(-1)
        lat = pg.build_lattice(2, 2, 1.0)
        st = pg.PartitionState([0, 0, 0, 0])
        cfg = pg.GswConfig(kappa=1.0, tau=0.0)
        rng = np.random.default_rng(1)
        n_rep = 100_000
        count = sum(int(pg.sample_bonds(lat, st, cfg, rng).bonds[0])
                    for _ in range(n_rep))
        p_target = 1 - math.exp(-1)
        se = math.sqrt(p_target * (1 - p_target) / n_rep)
        assert abs(count / n_rep - p_target) < 3 * se

    def test_bond_frequency_with_similarity_damping(self):
        bh = np.array([0.0, 1.0, 0.0, 1.0])
        lat = pg.build_lattice(2, 2, 0.9)
        st = pg.PartitionState([0, 0, 0, 0])
        cfg = pg.GswConfig(kappa=0.7, tau=0.5, beta_hat=bh)
        rng = np.random.default_rng(2)
        n_rep = 100_000
        counts = np.zeros(lat.n_pairs)
        for _ in range(n_rep):
            counts += pg.sample_bonds(lat, st, cfg, rng).bonds
        p_target = 1 - np.exp(-0.9 * pg.zeta_table(cfg, lat))
        se = np.sqrt(p_target * (1 - p_target) / n_rep)
        assert np.all(np.abs(counts / n_rep - p_target) < 3 * se + 1e-12)

    def test_bonds_never_cross_labels_under_any_state(self):
        rng = np.random.default_rng(3)
        lat = pg.build_lattice(4, 4, 1.2)
        cfg = pg.GswConfig(kappa=1.0, tau=0.0)
        for _ in range(500):
            st = pg.PartitionState(rng.integers(4, size=16))
            bonds = pg.sample_bonds(lat, st, cfg, rng)
            same = st.labels[lat.pair_j] == st.labels[lat.pair_k]
            assert not np.any(bonds.bonds[~same])

    def test_kappa_zero_gives_singletons(self):
        lat = pg.build_lattice(3, 3, 2.0)
        st = pg.PartitionState(np.zeros(9, dtype=int))
        cfg = pg.GswConfig(kappa=0.0, tau=0.0)
        rng = np.random.default_rng(4)
        bonds = pg.sample_bonds(lat, st, cfg, rng)
        assert bonds.n_bonds == 0
        assert pg.nested_clusters(lat, bonds).O == 9


class TestReassignNested:
    def _setup(self, seed=0, ups=0.4):
        rng = np.random.default_rng(seed)
        lat = pg.build_lattice(2, 2, ups)
        X = rng.standard_normal((6, 4))
        W = np.ones((6, 1))
        y = X @ np.array([1.0, 1.0, -1.0, -1.0]) + rng.standard_normal(6) * 0.5
        return pg.Dataset(y, W, X, lat), lat, rng

    def test_invariants_over_many_updates(self, default_hyper):
        data, lat, rng = self._setup()
        cfg = pg.GswConfig(kappa=0.5, tau=0.0)
        model = pg.DP(1.0)
        state = pg.PartitionState([0, 0, 0, 0])
        eta = np.ones(1)
        for _ in range(200):
            bonds = pg.sample_bonds(lat, state, cfg, rng)
            nested = pg.nested_clusters(lat, bonds)
            state, eta = pg.reassign_nested(
                data, lat, state, nested, bonds, eta, model, default_hyper,
                cfg, rng)
            assert eta.shape[0] == state.M
            assert np.all(eta > 0)
            assert state.M <= lat.p
            # canonical labels
            assert state.labels.tolist() == \
                pg.canonicalize(state).labels.tolist()

    def test_rejects_inconsistent_nested(self, default_hyper):
        data, lat, rng = self._setup()
        cfg = pg.GswConfig(kappa=0.5, tau=0.0)
        state = pg.PartitionState([0, 0, 0, 0])
        bonds = pg.BondSet(np.zeros(lat.n_pairs), lat)
        wrong = pg.NestedClustering(np.zeros(4, dtype=np.int64), 1)
        with pytest.raises(ValueError):
            pg.reassign_nested(data, lat, state, wrong, bonds, np.ones(1),
                               pg.DP(1.0), default_hyper, cfg, rng)

    def test_exactness_quick(self, default_hyper, hyper_tuple):
        # light version of the enumeration gate (full run in acceptance)
        data, lat, _ = self._setup(seed=7, ups=0.4)
        model = pg.DP(1.0)
        cfg = pg.GswConfig(kappa=0.5, tau=0.0)
        pairs = list(zip(lat.pair_j.tolist(), lat.pair_k.tolist()))
        parts, post = exact_partition_posterior(
            data.y, data.W, data.X, pairs, 0.4, "DP", 1.0, hyper_tuple,
            alpha=1.0)
        codes, _, _ = pg.run_partition_sweeps(
            data, lat, pg.PartitionState([0, 0, 0, 0]), model,
            default_hyper, cfg, n_sweeps=150_000, burn_in=5_000, seed=11,
            eta_fixed=1.0)
        freq = np.bincount(codes, minlength=4 ** 4) / len(codes)
        emp = {z: freq[sum(v * 4 ** i for i, v in enumerate(z))]
               for z in parts}
        exact = {z: post[i] for i, z in enumerate(parts)}
        assert tv_distance(emp, exact) < 0.02

    def test_kappa_zero_matches_single_site_reference(self, default_hyper,
                                                      hyper_tuple):
        # kappa=0 reduces to single-site updates with the Potts factor
        # exp(ups) per agreeing (necessarily unbonded) neighbour
        data, lat, _ = self._setup(seed=8, ups=0.3)
        cfg = pg.GswConfig(kappa=0.0, tau=0.0)
        pairs = list(zip(lat.pair_j.tolist(), lat.pair_k.tolist()))
        ref = single_site_reference_sampler(
            data.y, data.W, data.X, pairs, 0.3, 1.0, 1.0, hyper_tuple,
            n_sweeps=40_000, burn_in=2_000, seed=21)
        codes, _, _ = pg.run_partition_sweeps(
            data, lat, pg.PartitionState([0, 0, 0, 0]), pg.DP(1.0),
            default_hyper, cfg, n_sweeps=150_000, burn_in=5_000, seed=22,
            eta_fixed=1.0)
        freq = np.bincount(codes, minlength=4 ** 4) / len(codes)
        emp = {}
        for z in set_partitions(4):
            emp[z] = freq[sum(v * 4 ** i for i, v in enumerate(z))]
        assert tv_distance(emp, ref) < 0.02

    def test_sweep_driver_with_auxiliary_scale_draws(self, default_hyper):
        data, lat, _ = self._setup(seed=3, ups=0.4)
        cfg = pg.GswConfig(kappa=0.5, tau=0.0)
        codes, state, eta = pg.run_partition_sweeps(
            data, lat, pg.PartitionState([0, 0, 0, 0]), pg.DP(1.0),
            default_hyper, cfg, n_sweeps=2000, burn_in=100, seed=5,
            eta_star=np.ones(1))
        assert codes.shape[0] == 2000
        assert eta.shape[0] == state.M
        assert np.all(eta > 0)

    def test_moves_whole_nested_clusters(self, default_hyper):
        # pixels joined by bonds always land in a common cluster
        data, lat, rng = self._setup(seed=5, ups=1.0)
        cfg = pg.GswConfig(kappa=1.0, tau=0.0)
        state = pg.PartitionState([0, 0, 1, 1])
        eta = np.ones(2)
        for _ in range(100):
            bonds = pg.sample_bonds(lat, state, cfg, rng)
            nested = pg.nested_clusters(lat, bonds)
            state, eta = pg.reassign_nested(
                data, lat, state, nested, bonds, eta, pg.DP(1.0),
                default_hyper, cfg, rng)
            for members in nested.members:
                assert np.unique(state.labels[members]).size == 1
