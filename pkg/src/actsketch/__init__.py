"""actsketch: compact histogram representations of DNN activation spaces.

Builds node-specific histogram sketches of background activations, scores
test activations into p-value ranges (with empirical and KDE baselines),
compares the resulting distributions, subset-scans for anomalous node
groups, and benchmarks memory/runtime trade-offs.
"""

from .activations import (ActivationMatrix, GeneratorSpec, IngestError,
                          NodeDistribution, inject_anomaly, read_activations,
                          synthesize, write_activations)
from .bench import (BenchReport, bench_build, bench_query, empirical_repr_bytes,
                    kde_repr_bytes, report_to_markdown, reports_to_json)
from .pvalues import (EmpiricalModel, KdeModel, PValueMatrix, PValueRange,
                      ShapeError, draw_from_range, draw_matrix,
                      empirical_pvalue, fit_empirical, fit_kde,
                      histogram_pvalue_printed, histogram_pvalue_range,
                      kde_pvalue, pvalue_matrix_from_csv, pvalue_matrix_to_csv,
                      score_matrix)
from .scan import (DEFAULT_ALPHAS, SubsetScanResult, berk_jones_score,
                   ltss_scan, scan_matrix, scan_results_to_csv, score_samples,
                   scores_from_csv)
from .sketch import (NodeHistogram, SchemaError, SketchConfig, SketchModel,
                     build_node_histogram, build_sketch, detect_modes,
                     freedman_diaconis_width, representation_size_bytes,
                     sketch_from_json, sketch_to_json, sturges_bins)
from .stats import (ComparisonReport, KSResult, auroc, compare_representations,
                    export_distribution, ks_two_sample)

__version__ = "0.1.0"
