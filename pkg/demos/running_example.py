"""Walk through one diagnosis on the four-variable GPU/swap/latency system.

    python3 demos/running_example.py
"""

from causaldebug.causal_discovery import learn_pag
from causaldebug.causal_inference import ace, extract_paths, fit_cpts, rank_paths, score_paths
from causaldebug.data_model import FaultSpec, discretize, fault_thresholds
from causaldebug.datasets import running_example
from causaldebug.engine import diagnose
from causaldebug.entropic_orientation import EntropicConfig, resolve_pag


def main():
    table = running_example(n=2000, seed=0)
    fault = FaultSpec(("latency",), percentile=99.0)
    thresholds = fault_thresholds(table, fault)
    print(f"{table.n_rows} observations; latency above {thresholds['latency']:.2f} counts as a fault\n")

    # step 1: constraint-based discovery leaves some edges undecided (circle marks)
    dtable = discretize(table)
    pag = learn_pag(dtable)
    print("partial graph:")
    for edge in pag.edges():
        print(f"   {pag.names[edge.a]} {edge.symbol()} {pag.names[edge.b]}")

    # step 2: the entropic test settles each circle edge
    admg = resolve_pag(pag, dtable, EntropicConfig())
    print("\nresolved graph:")
    for edge in admg.edges():
        print(f"   {admg.names[edge.a]} {edge.symbol()} {admg.names[edge.b]}")
    for line in admg.log:
        print("   note:", line)

    # step 3: causal paths into latency, ranked by their average causal effect
    model = fit_cpts(admg, dtable)
    ranked = rank_paths(score_paths(model, extract_paths(admg, "latency")), admg=admg)
    print("\npaths into latency:")
    for path in ranked:
        print(f"   {' -> '.join(path.nodes):40s} path ACE {path.path_ace:.3f}")
    for option in ("gpu_growth", "swap_mem"):
        print(f"   ACE of {option} on latency: {ace(model, 'latency', option):.3f}")

    # step 4: the full pipeline, with counterfactual scoring of every repair
    report = diagnose(table, fault)
    print(f"\nfaulty row {report.factual_row}: {table.row_dict(report.factual_row)}")
    print("root causes:", ", ".join(report.root_causes))
    print("best repairs:")
    for r in report.repairs[:5]:
        print(f"   {r.assignment}  ITE {r.ite:+.3f}")


if __name__ == "__main__":
    main()
