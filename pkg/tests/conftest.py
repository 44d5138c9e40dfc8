"""Shared fixtures: random instance factories, a planted-quality dataset,
and a small text corpus written to disk for CLI runs."""

import numpy as np
import pytest

from mtjudge import PairwiseInput


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_instances(rng, n, x_dim=3, skip_dim=2):
    """Labeled comparisons with uniform random vectors and 0/1 labels."""
    out = []
    for _ in range(n):
        out.append(PairwiseInput(
            rng.uniform(-1, 1, x_dim), rng.uniform(-1, 1, x_dim),
            rng.uniform(-1, 1, x_dim), rng.uniform(-1, 1, skip_dim),
            rng.uniform(-1, 1, skip_dim), float(rng.integers(2))))
    return out


class PlantedData:
    """Synthetic judgments driven by one planted quality feature.

    Every (segment, system) pair gets a latent quality f ~ U(0, 1) exposed
    as the first skip feature, one uniform nuisance feature, and uniform
    nuisance sentence vectors. Judgments sample system pairs whose planted
    qualities differ by more than `margin`; the winner is the higher f. A
    small fraction of training labels is flipped as annotation noise; the
    held-out slice keeps clean labels.
    """

    N_SEGMENTS = 50
    N_SYSTEMS = 10
    N_X = 3

    def __init__(self, seed=101, n_judgments=500, n_dev=100, flip=0.02,
                 margin=0.1):
        gen = np.random.default_rng(seed)
        self.f = gen.uniform(0.0, 1.0, (self.N_SEGMENTS, self.N_SYSTEMS))
        self.g = gen.uniform(0.0, 1.0, (self.N_SEGMENTS, self.N_SYSTEMS))
        self.xs = gen.uniform(-1.0, 1.0, (self.N_SEGMENTS, self.N_SYSTEMS, self.N_X))
        self.xr = gen.uniform(-1.0, 1.0, (self.N_SEGMENTS, self.N_X))
        instances = []
        while len(instances) < n_judgments:
            s = int(gen.integers(self.N_SEGMENTS))
            a, b = (int(v) for v in gen.choice(self.N_SYSTEMS, size=2, replace=False))
            if abs(self.f[s, a] - self.f[s, b]) <= margin:
                continue
            label = 1.0 if self.f[s, a] > self.f[s, b] else 0.0
            instances.append(PairwiseInput(
                self.xs[s, a], self.xs[s, b], self.xr[s],
                np.array([self.f[s, a], self.g[s, a]]),
                np.array([self.f[s, b], self.g[s, b]]), label))
        self.train = instances[:n_judgments - n_dev]
        self.dev = instances[n_judgments - n_dev:]
        n_flip = int(round(flip * len(self.train)))
        for i in gen.choice(len(self.train), size=n_flip, replace=False):
            self.train[i].label = 1.0 - self.train[i].label

    def scoring_arrays(self):
        """Raw (unnormalized) inputs for every (segment, system) pair,
        flattened segment-major: (trans, skip, ref) row matrices."""
        n_x = self.N_X
        trans = self.xs.reshape(-1, n_x)
        refs = np.repeat(self.xr, self.N_SYSTEMS, axis=0)
        skips = np.stack([self.f.ravel(), self.g.ravel()], axis=1)
        return trans, skips, refs


@pytest.fixture(scope="session")
def planted():
    return PlantedData()


def write_text_corpus(root, seed=7, n_segments=12, n_systems=4):
    """Write a small ranking corpus (segments, rankings, embeddings, gold
    system scores) under `root`; returns a dict of paths.

    System outputs copy the reference word-for-word with probability equal
    to the system's quality, so better systems really are better.
    """
    gen = np.random.default_rng(seed)
    systems = [f"sys{i}" for i in range(n_systems)]
    quality = {s: q for s, q in zip(systems, np.linspace(0.95, 0.1, n_systems))}
    words = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta"]
    seg_lines, rank_rows = [], ["langpair,segid,sysid,rank"]
    for seg in range(n_segments):
        segid = f"s{seg}"
        ref = list(gen.choice(words, size=6))
        seg_lines.append(f"{segid}\tREF\t{' '.join(ref)}")
        noisy = {}
        for sysid in systems:
            out = [w if gen.random() < quality[sysid] else str(gen.choice(words))
                   for w in ref]
            seg_lines.append(f"{segid}\t{sysid}\t{' '.join(out)}")
            noisy[sysid] = quality[sysid] + gen.normal(0, 0.05)
        ranked = sorted(noisy.items(), key=lambda kv: -kv[1])
        for rank, (sysid, _) in enumerate(ranked, start=1):
            rank_rows.append(f"de-en,{segid},{sysid},{rank}")
    paths = {
        "segments": root / "segments.tsv",
        "rankings": root / "rankings.csv",
        "embeddings": root / "emb.txt",
        "systems": root / "gold.tsv",
    }
    paths["segments"].write_text("\n".join(seg_lines) + "\n", encoding="utf-8")
    paths["rankings"].write_text("\n".join(rank_rows) + "\n", encoding="utf-8")
    emb_lines = [f"{w} " + " ".join(f"{v:.4f}" for v in gen.normal(0, 0.5, 5))
                 for w in words]
    paths["embeddings"].write_text("\n".join(emb_lines) + "\n", encoding="utf-8")
    paths["systems"].write_text(
        "\n".join(f"de-en\t{s}\t{quality[s]:.4f}" for s in systems) + "\n",
        encoding="utf-8")
    return paths


@pytest.fixture
def text_corpus(tmp_path):
    return write_text_corpus(tmp_path)
