"""Acceptance criteria, one test each.

Every test prints a single ``[ACCEPTANCE] PASS|FAIL <criterion>: <detail>``
line (shown even when pytest captures output) and then asserts.
"""
import time

import numpy as np
import pytest
import torch

from dhse import cs
from dhse.cli import build_parser, main
from dhse.datasets import SynthParams, ingest_ogbn_arxiv, load_dataset, synth
from dhse.distance import distribution_stats
from dhse.features import extract_all
from dhse.graph import Graph, extract_ego_net
from dhse.models import AgdnLayer, AttentionGraph, GatLayer
from dhse.pipeline import RunConfig, cmd_eval
from dhse.structure import clustering, count_triangles, graph_level, square_clustering

import oracles
from instances import gradient_instance, random_graph, write_fake_ogb
from oracles import NAMED_GRAPHS, adjacency_sets, ego_nodes, induced, random_edges


@pytest.fixture
def report(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n[ACCEPTANCE] {'PASS' if ok else 'FAIL'} {name}: {detail}")
        assert ok, detail

    return emit


def oracle_graphs():
    """The 100 random graphs (n <= 30, p = 0.3, some self-loops) plus the named small graphs."""
    rng = np.random.default_rng(2024)
    graphs = [(name, n, edges) for name, (n, edges) in NAMED_GRAPHS.items()]
    for i in range(100):
        n = int(rng.integers(1, 31))
        graphs.append((f"gnp{i}", n, random_edges(rng, n, 0.3, loop_p=0.1)))
    return graphs


def to_graph(n, edges):
    return Graph.from_edges([u for u, _ in edges], [v for _, v in edges], n)


def test_1_structure_oracle(report):
    t0 = time.perf_counter()
    worst, checked, mismatched = 0.0, 0, []
    for name, n, edges in oracle_graphs():
        g = to_graph(n, edges)
        adj, loops = adjacency_sets(n, edges)
        for v in range(n):
            for r in (1, 2):
                net = extract_ego_net(g, v, r)
                sub = induced(adj, ego_nodes(adj, v, r))
                c = net.center_local
                got = [count_triangles(net, c), clustering(net, c), square_clustering(net, c), *graph_level(net)]
                want = [oracles.triangles(sub, v), oracles.clustering(sub, v), oracles.square_clustering(sub, v),
                        *oracles.graph_level(sub, loops)]
                err = max(abs(a - b) for a, b in zip(got, want))
                worst = max(worst, err)
                checked += 1
                if err > 1e-12:
                    mismatched.append((name, v, r))
    elapsed = time.perf_counter() - t0
    ok = not mismatched and elapsed < 10
    report("1 structure oracle", ok,
           f"{checked} (graph, node, hop) cases, max abs err {worst:.1e} (tol 1e-12), {elapsed:.2f}s (limit 10s)"
           + (f", mismatches e.g. {mismatched[:3]}" if mismatched else ""))


def test_2_distance_stats(report):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        seq = rng.integers(1, int(rng.integers(2, 8)), size=int(rng.integers(1, 80)))
        worst = max(worst, np.max(np.abs(distribution_stats(seq) - np.array(oracles.two_pass_stats(seq)))))
    empty = distribution_stats([]).tolist() == [0.0] * 7
    const = distribution_stats([2, 2, 2]).tolist() == [2, 2, 2, 2, 0, 0, 0]
    ok = worst <= 1e-12 and empty and const
    report("2 distance statistics", ok,
           f"1000 sequences, max abs err {worst:.1e} (tol 1e-12); empty->zeros {empty}; constant->zero moments {const}")


def test_3_gradients(report):
    t0 = time.perf_counter()
    errors = []
    for seed in range(20):
        kind = ("gat", "agdn")[seed % 2]
        loss, params = gradient_instance(seed, kind)
        errors.append(oracles.finite_difference_check(loss, params))
    elapsed = time.perf_counter() - t0
    worst = max(errors)
    ok = worst < 1e-4 and elapsed < 60
    report("3 gradient check", ok,
           f"20 instances (encoder+GAT/AGDN+head, <=12 nodes, width<=8, float64), "
           f"max rel err {worst:.1e} (tol 1e-4), {elapsed:.1f}s (limit 60s)")


def test_4_attention_normalization(report):
    worst = 0.0
    rng = np.random.default_rng(11)
    for seed in range(30):
        n = int(rng.integers(1, 60))
        ag = AttentionGraph(random_graph(rng, n, p=float(rng.uniform(0.02, 0.5))))
        h = torch.from_numpy(rng.normal(scale=3.0, size=(n, 8)))
        gen = torch.Generator().manual_seed(seed)
        _, alpha = GatLayer(8, 6, heads=3, generator=gen)(h, ag, return_attention=True)
        rows = torch.zeros(n, 3, dtype=torch.float64).index_add(0, ag.dst, alpha)
        worst = max(worst, (rows - 1).abs().max().item())
        for transition in ("gat", "sym"):
            layer = AgdnLayer(8, 6, heads=3, diffusion_k=3, transition=transition, generator=gen)
            _, theta = layer(h, ag, return_attention=True)
            worst = max(worst, (theta.sum(-1) - 1).abs().max().item())
    report("4 attention normalization", worst <= 1e-9,
           f"30 random instances, max |row sum - 1| = {worst:.1e} (tol 1e-9)")


def test_5_cs_linear_solve(report):
    graphs = [to_graph(n, edges) for _, n, edges in oracle_graphs() if n <= 10]
    graphs.append(Graph.from_edges([0], [1]))
    worst = 0.0
    rng = np.random.default_rng(5)
    for g in graphs:
        S = cs.normalized_adjacency(g)
        B = rng.normal(size=(g.num_nodes, 4))
        for alpha in (0.5, 0.8, 0.9, 0.95):
            X, _, _ = cs.label_spread(B, S, alpha, 5000, 1e-12)
            worst = max(worst, np.max(np.abs(X - oracles.dense_spread_solution(S, B, alpha))))
    report("5 C&S fixed point vs dense solve", worst <= 1e-8,
           f"{len(graphs)} graphs with <=10 nodes x 4 alphas, max abs err {worst:.1e} (tol 1e-8)")


def test_6_scaling(report):
    nx = pytest.importorskip("networkx")
    extract_all(Graph.from_edges([0, 1], [1, 2]), 2)  # compile outside the timed region
    times = {}
    for n in (10_000, 20_000, 40_000):
        G = nx.random_regular_graph(8, n, seed=n)
        e = np.array(G.edges(), dtype=np.int64)
        g = Graph.from_edges(e[:, 0], e[:, 1], n)
        best = np.inf
        for _ in range(3):
            t0 = time.perf_counter()
            extract_all(g, 2)
            best = min(best, time.perf_counter() - t0)
        times[n] = best
    ratios = [times[20_000] / times[10_000], times[40_000] / times[20_000]]
    ok = max(ratios) <= 2.5
    report("6 linear scaling", ok,
           "8-regular, k=2, best of 3: " + ", ".join(f"n={n}: {t:.3f}s" for n, t in times.items())
           + f"; per-doubling ratios {ratios[0]:.2f}, {ratios[1]:.2f} (limit 2.5)")


def test_7_end_to_end(report, tmp_path):
    t0 = time.perf_counter()
    params = SynthParams()
    assert (params.nodes, params.classes, params.p_in, params.p_out, params.feature_dim) == (1000, 4, 0.05, 0.005, 16)
    data = synth(tmp_path / "data", params)
    cfg = RunConfig(data_dir=str(data), out_dir=str(tmp_path / "out"), model="agdn", num_seeds=10)
    results = cmd_eval(cfg, load_dataset(data))
    elapsed = time.perf_counter() - t0
    # accuracy of the model train() hands back (best-validation parameters are restored)
    final_train = [r.train_acc for r in results]
    base = float(np.mean([r.test_acc for r in results]))
    post = float(np.mean([r.cs_test_acc for r in results]))
    checks = {"a": min(final_train) > 0.95, "b": post >= base, "c": elapsed < 600}
    report("7 end-to-end desk-scale run", all(checks.values()),
           f"10 seeds AGDN: min final train acc {min(final_train):.4f} (>0.95: {checks['a']}); "
           f"mean test {base:.4f} -> {post:.4f} with C&S (>=: {checks['b']}); "
           f"{elapsed:.0f}s (<600s: {checks['c']})")


def test_8_non_reproducibility_statement(report, tmp_path):
    statement = ("Full-scale ogbn-arxiv accuracies (e.g. 0.7439 +/- 0.0019 test accuracy for the "
                 "DHSE-AGDN + C&S variant) are NOT reproduced here; this suite only runs at desk scale. "
                 "The ogbn-arxiv ingest path is provided without any accuracy gate.")
    subcommands = build_parser()._subparsers._group_actions[0].choices
    write_fake_ogb(tmp_path / "ogb", gz=True)
    ingest_ogbn_arxiv(tmp_path / "ogb", tmp_path / "ds")
    via_cli = main(["ingest", "--raw", str(tmp_path / "ogb"), "--out", str(tmp_path / "ds2")]) == 0
    ok = "ingest" in subcommands and load_dataset(tmp_path / "ds").graph.num_nodes == 5 and via_cli
    report("8 non-reproducibility statement", ok, statement + f" Ingest subcommand present and working: {ok}.")
