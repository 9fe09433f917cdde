"""Replay-free graph class-incremental learning.

A frozen SGC backbone, one lightweight feature modulator per task, an
expanding classifier, and task identification from anchored multi-hop
prototypes.
"""
from .amp import (AMPConfig, Prototype, PrototypeBank, amp_propagate, compute_prototype,
                  cosine_similarity, infer_task_id, ls_prototype)
from .backbone import BackboneWeights, extract_features, init_backbone
from .classifier import (UnifiedClassifier, class_weights, expand_classifier,
                         masked_weighted_ce, predict)
from .config import RunConfig
from .data import (ContinualDataset, DataError, SBMConfig, TaskData, TaskSplit,
                   generate_sbm_sequence, load_dataset, save_dataset, validate_dataset)
from .graph import (PropagationOperator, SparseGraph, build_graph, dirichlet_energy,
                    normalize_adjacency, propagate)
from .metrics import (average_accuracy, average_forgetting, separability_report,
                      task_id_accuracy)
from .nsm import NSMParams, base_modulation, init_nsm, layer_norm, nsm_backward, nsm_forward
from .training import AdamState, adam_step, count_trainable, run_sequence, train_task

__version__ = "0.1.0"
