"""JSON schemas for the files a run or a diagnosis writes."""

NUM = {"type": "number"}
NUM_OR_NULL = {"type": ["number", "null"]}
HEX64 = {"type": "string", "pattern": "^[0-9a-f]{64}$"}
MATRIX = {"type": "array", "items": {"type": "array", "items": NUM}}

METRICS = {
    "type": "object",
    "required": ["AA", "AF", "per_task_accuracy", "task_id_accuracy"],
    "properties": {
        "AA": {"type": "number", "minimum": 0, "maximum": 1},
        "AF": NUM_OR_NULL,
        "per_task_accuracy": {"type": "array", "minItems": 1,
                              "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "task_id_accuracy": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
    },
}

TRACE = {
    "type": "array",
    "items": {
        "type": "object",
        "required": ["after_task", "task", "inferred", "similarity"],
        "properties": {"after_task": {"type": "integer", "minimum": 0},
                       "task": {"type": "integer", "minimum": 0},
                       "inferred": {"type": "integer", "minimum": 0},
                       "similarity": NUM_OR_NULL},
        "additionalProperties": False,
    },
}

RUN_CONFIG = {
    "type": "object",
    "required": ["method", "seed", "epochs", "lr", "weight_decay", "backbone.d_hid",
                 "backbone.k_prop", "amp.alpha", "amp.hop_set", "nsm.d_task", "nsm.heads",
                 "nsm.rank", "data", "out"],
    "properties": {
        "method": {"enum": ["taam", "taam_l", "finetune", "oracle", "joint"]},
        "seed": {"type": "integer"},
        "epochs": {"type": "integer", "minimum": 0},
        "amp.hop_set": {"type": "array", "items": {"type": "integer", "minimum": 0},
                        "minItems": 1},
        "amp.alpha": {"type": "number", "minimum": 0, "maximum": 1},
    },
}

NSM = {
    "type": "object",
    "required": ["variant", "dims", "tensors"],
    "properties": {
        "variant": {"enum": ["taam", "taam_l"]},
        "dims": {"type": "object", "required": ["F", "heads", "d_task", "rank"]},
        "tensors": {"type": "object", "additionalProperties": {"type": "array"}},
    },
}

PROTOTYPES = {
    "type": "object",
    "required": ["alpha", "hop_set", "feature_dim", "prototypes"],
    "properties": {"alpha": NUM, "feature_dim": {"type": "integer", "minimum": 1},
                   "prototypes": MATRIX},
}

CLASSIFIER = {
    "type": "object",
    "required": ["d_hid", "class_to_task", "W"],
    "properties": {"d_hid": {"type": "integer"}, "W": MATRIX,
                   "class_to_task": {"type": "object",
                                     "additionalProperties": {"type": "integer"}}},
}

SUMMARY = {
    "type": "object",
    "required": ["timings", "parameter_counts", "checksums"],
    "properties": {
        "parameter_counts": {"type": "object",
                             "required": ["backbone_frozen", "per_task_trainable"]},
        "checksums": {"type": "array", "items": {"type": "object",
                                                 "required": ["backbone"],
                                                 "properties": {"backbone": HEX64}}},
    },
}

MANIFEST = {
    "type": "object",
    "required": ["name", "seed", "feature_dim", "tasks"],
    "properties": {
        "feature_dim": {"type": "integer", "minimum": 1},
        "tasks": {"type": "array", "minItems": 1, "items": {
            "type": "object", "required": ["task_id", "class_set", "splits"],
            "properties": {"splits": {"type": "object",
                                      "required": ["train", "val", "test"]}}}},
    },
}

SEPARABILITY = {
    "type": "object",
    "required": ["embed", "v_intra", "d_inter", "p_error_bound", "dirichlet_energy_raw",
                 "dirichlet_energy_embedded", "task_id_accuracy", "inferred"],
    "properties": {
        "embed": {"enum": ["raw", "ls", "amp"]},
        "v_intra": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "d_inter": MATRIX,
        "p_error_bound": {"type": "array", "items": {"type": "array", "items": {
            "type": "number", "exclusiveMinimum": 0, "maximum": 1}}},
        "task_id_accuracy": {"type": "number", "minimum": 0, "maximum": 1},
    },
}

RUN_FILES = {"metrics.json": METRICS, "taskid_trace.json": TRACE, "config.json": RUN_CONFIG,
             "prototypes.json": PROTOTYPES, "classifier.json": CLASSIFIER,
             "summary.json": SUMMARY}
