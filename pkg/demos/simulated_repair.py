"""Debug a synthetic system whose ground truth is known.

A random system is generated, its slowest runs are declared faulty, and the
repair loop proposes configurations until one of them is measured fault-free.

    python3 demos/simulated_repair.py [seed]
"""

import sys

from causaldebug.data_model import FaultSpec
from causaldebug.engine import Budget, repair_loop
from causaldebug.simulator import (
    ScmSpec,
    SimulatorEvaluator,
    generate_scm,
    oracle_ace,
    sample_observational,
    score_diagnosis,
    true_root_causes,
)


def main(seed=3):
    scm = generate_scm(ScmSpec(n_options=4, n_events=4, n_nfps=1, seed=seed))
    print("true mechanisms:")
    for node in scm.nodes:
        parents = ", ".join(scm.nodes[p].name for p in node.parents) or "-"
        print(f"   {node.name:8s} <- {parents}")
    truth = true_root_causes(scm, ["nfp0"])
    print("options that really move nfp0:", {o: round(oracle_ace(scm, "nfp0", o), 3) for o in truth})

    table = sample_observational(scm, 2000, seed + 1)
    outcome = repair_loop(table, FaultSpec(("nfp0",)), SimulatorEvaluator(scm, seed + 1), Budget())
    print(f"\nfaulty row {outcome.factual_row}, threshold {outcome.thresholds['nfp0']:.3f}")
    for k, ev in enumerate(outcome.evaluations, 1):
        print(f"   try {k}: {ev.assignment} -> nfp0 {ev.nfps['nfp0']:.3f}, gain {ev.gain['nfp0']:.1f}%")
    print("status:", outcome.status.value)
    print("diagnosis vs truth:", score_diagnosis(outcome.report, scm))


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 3)
