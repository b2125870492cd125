"""Low-rank adapter fine-tuning harness for prompt-classification exports."""

from .collator import (
    ANSWER_MARKER,
    IGNORE_INDEX,
    Batch,
    CollatorError,
    build_masked_batch,
    masked_loss,
    split_example,
)
from .config import (
    DEFAULT_TARGETS,
    MODEL_PRESETS,
    AdapterConfig,
    ModelPreset,
    TrainConfig,
    load_config,
    save_config,
)
from .lora import (
    LoRALinear,
    apply_lora,
    count_trainable,
    has_adapter,
    load_adapter,
    lora_param_count,
    preset_trainable,
    save_adapter,
    trainable_parameters,
)
from .model import TinyDecoder
from .tokenizer import EOS_TOKEN, UNK_TOKEN, SimpleTokenizer
from .train import DatasetError, TrainResult, evaluate_loss, finetune, load_jsonl, split_examples

__version__ = "0.1.0"

__all__ = [
    "ANSWER_MARKER",
    "IGNORE_INDEX",
    "AdapterConfig",
    "Batch",
    "CollatorError",
    "DEFAULT_TARGETS",
    "DatasetError",
    "EOS_TOKEN",
    "LoRALinear",
    "MODEL_PRESETS",
    "ModelPreset",
    "SimpleTokenizer",
    "TinyDecoder",
    "TrainConfig",
    "TrainResult",
    "UNK_TOKEN",
    "apply_lora",
    "build_masked_batch",
    "count_trainable",
    "evaluate_loss",
    "finetune",
    "has_adapter",
    "load_adapter",
    "load_config",
    "load_jsonl",
    "lora_param_count",
    "masked_loss",
    "preset_trainable",
    "save_adapter",
    "save_config",
    "split_example",
    "split_examples",
    "trainable_parameters",
]
