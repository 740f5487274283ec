"""
nDCG@10 evaluation and result aggregation
=========================================

Scores a toy retrieval run against graded judgments, then reproduces the
aggregation of the packaged published nDCG@10 results: per-configuration
averages over the 10 BEIR datasets and the aggregated-vs-individual LLM
comparison.
"""

from hardneg import (
    Qrels,
    RunRanking,
    aggregate_table,
    compare_aggregated_vs_individual,
    ndcg_at_k,
)
from hardneg.evaluation import load_reference_cells

# --- nDCG on a toy run ---------------------------------------------------------
# one query, two judged documents with grades 2 and 1, ranked in the wrong order
qrels = Qrels({("q1", "best"): 2, ("q1", "good"): 1})
run = RunRanking({"q1": [("good", 9.0), ("best", 8.0), ("junk", 7.0)]})
result = ndcg_at_k(run, qrels, k=10)
print(f"toy run ndcg@10: {result.per_query['q1']:.5f} (ideal order would give 1.0)")

# --- aggregate the packaged published results -----------------------------------
cells, published_avg, order = load_reference_cells()
report = aggregate_table(cells)
print(f"\naggregated {len(report.configs)} configurations x {len(report.datasets)} datasets")
print(report.table)

# two published rows do not match the mean of their own published cells;
# the aggregation makes that visible rather than papering over it
print("\nrows whose published average disagrees with their cells:")
for config in order:
    delta = report.averages[config] - published_avg[config]
    if abs(delta) > 0.0005 + 1e-9:
        print(f"  {config}: computed {report.averages[config]:.4f}, published {published_avg[config]:.3f}")

# --- aggregated vs individual LLM datasets --------------------------------------
print("\naggregated-vs-individual comparison (published averages):")
for comp in compare_aggregated_vs_individual(published_avg):
    direction = "above" if comp.difference > 0 else "below"
    print(
        f"  {comp.aggregated_config}: {comp.aggregated:.3f} vs mean of 4 individual runs "
        f"{comp.individual_mean:.5f} -> aggregated {direction} by {abs(comp.difference):.5f}"
    )
