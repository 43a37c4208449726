#!/usr/bin/env python3
"""Smoke test for the abacus_eon_py extension module.

Build the module first, then run this script from the repository root:

    cargo build -p abacus-eon-py
    python3 python/smoke_test.py
"""
import math
import os
import shutil
import sys
import tempfile


def load_module():
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    candidates = [
        os.path.join(root, "target", profile, name)
        for profile in ("debug", "release")
        for name in ("libabacus_eon_py.so", "libabacus_eon_py.dylib", "abacus_eon_py.dll")
    ]
    built = next((p for p in candidates if os.path.exists(p)), None)
    if built is None:
        sys.exit("build the extension first: cargo build -p abacus-eon-py")
    stage = tempfile.mkdtemp(prefix="abacus-eon-py-")
    ext = ".pyd" if built.endswith(".dll") else ".so"
    shutil.copyfile(built, os.path.join(stage, "abacus_eon_py" + ext))
    sys.path.insert(0, stage)
    import abacus_eon_py

    return abacus_eon_py


def main():
    eon = load_module()
    print(f"abacus_eon_py {eon.__version__}")

    # slot conversion: ceil(rate / (30 m))
    assert eon.slots_required(70.0, 1) == 3
    assert eon.slots_required(700.0, 4) == 6

    # fragmentation of the documented pattern
    frag = eon.link_fragmentation("10010")
    assert math.isclose(frag, 1.0 / 3.0, rel_tol=1e-12), frag
    assert eon.link_fragmentation("00000") == 0.0
    assert eon.link_fragmentation("11111") == 0.0

    topo = eon.Topology.builtin("six_node")
    print(topo, "nodes:", topo.nodes())
    assert topo.num_nodes == 6
    assert topo.num_links == 9

    sim = eon.Simulator(topo, slots=8, objective="abacus", routing="joint", pli=False)
    first = sim.admit(1, 6, 120.0)
    assert first is not None, "empty network must admit"
    print("admitted:", first)
    assert first["path"][0] == 1 and first["path"][-1] == 6
    assert first["num_slots"] >= 1
    used_before = sim.fsus_in_use
    assert used_before == (len(first["path"]) - 1) * first["num_slots"]

    second = sim.admit(5, 3, 60.0)
    assert second is not None
    assert sim.active_connections == 2
    assert 0.0 <= sim.fragmentation() <= 1.0

    sim.release(second["id"])
    sim.release(first["id"])
    assert sim.fsus_in_use == 0
    assert sim.active_connections == 0

    # impairment-constrained simulator with an audit
    sim = eon.Simulator(topo, slots=8, objective="abacus", routing="joint", pli=True)
    result = sim.admit(1, 2, 90.0)
    assert result is not None
    reports = sim.audit()
    assert len(reports) == 1 and reports[0]["pass"], reports
    print("audit:", reports)

    # restricted routing blocks two-hop paths the joint model would take
    sim = eon.Simulator(topo, slots=8, objective="jo", routing="ksp3", pli=False)
    restricted = sim.admit(4, 6, 60.0)
    assert restricted is not None
    assert len(restricted["path"]) > 3, restricted

    # trace generation round trip
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "t.trace")
        n = eon.write_trace(topo, path, seed=3, count=12)
        assert n == 12
        assert os.path.getsize(path) > 0

    print("smoke test passed")


if __name__ == "__main__":
    main()
