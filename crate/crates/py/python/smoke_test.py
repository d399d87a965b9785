"""Quick check of the bindings on the bundled toy fixture."""

import pathlib
import sys

import adregret

FIX = pathlib.Path(__file__).resolve().parents[2] / "core" / "tests" / "fixtures"


def main() -> int:
    inst = adregret.Instance.load(str(FIX / "toy_graph.txt"), str(FIX / "toy_campaign.json"))
    print(inst)

    a = adregret.Allocation.load(inst, str(FIX / "toy_allocation_a.txt"))
    clicks = sum(adregret.exact_spread(inst, i, s) for i, s in enumerate(a.sets))
    assert abs(clicks - 5.544) < 5e-4, clicks

    mean, stderr = adregret.mc_spread(inst, 0, a.sets[0], runs=20000, seed=1)
    assert abs(mean - adregret.exact_spread(inst, 0, a.sets[0])) < 5 * stderr + 1e-9

    for algo in ["tirm", "greedy-exact", "greedy-mc", "myopic", "myopic+"]:
        alloc, info = adregret.allocate(inst, algo, epsilon=0.2, seed=3, workers=1)
        again, _ = adregret.allocate(inst, algo, epsilon=0.2, seed=3, workers=2)
        assert alloc == again, algo
        assert not alloc.violations(inst), algo
        print(f"{algo:13s} regret {adregret.regret(inst, alloc):.4f} ({info['termination']})")

    rows = adregret.evaluate(inst, a, runs=2000, seed=0)
    assert len(rows) == inst.ad_count

    try:
        adregret.Instance.load("/no/such/graph.txt", str(FIX / "toy_campaign.json"))
    except OSError:
        pass
    else:
        raise AssertionError("missing graph accepted")

    big = adregret.Instance.generate("topical", 500, 3000, topics=2, ads=3, budget=(3, 5), ctp=(0.1, 0.3), seed=1)
    alloc, info = adregret.allocate(big, "tirm", epsilon=0.3, seed=1)
    print(big, alloc, info["theta"])
    print("ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
