"""Acceptance suite for the fine-tuning harness; one PASS line per criterion."""

import torch

from qlora_tuner import (
    MODEL_PRESETS,
    AdapterConfig,
    TinyDecoder,
    TrainConfig,
    apply_lora,
    build_masked_batch,
    count_trainable,
    finetune,
    lora_param_count,
    masked_loss,
    preset_trainable,
)
from qlora_tuner.tokenizer import SimpleTokenizer

from qlora_helpers import synthetic_examples, write_jsonl


def test_trainable_parameter_accounting():
    # framework count equals the closed form exactly on a toy decoder
    torch.manual_seed(0)
    model = TinyDecoder(vocab_size=60, d_model=48, n_heads=4, n_layers=3)
    cfg = AdapterConfig(r=16, target_modules=("q_proj", "k_proj", "v_proj", "o_proj"))
    apply_lora(model, cfg)
    trainable, total, fraction = count_trainable(model)
    shapes = [(48, 48)] * 4 * 3
    assert trainable == lora_param_count(shapes, 16)
    assert fraction == trainable / total

    # the 1B-class preset lands within 0.05 percentage points of 0.19%
    t, n, frac = preset_trainable(MODEL_PRESETS["llama-3.2-1b"], AdapterConfig(r=16))
    assert t == 2_359_296
    assert abs(100.0 * frac - 0.19) <= 0.05, f"fraction {100.0 * frac:.4f}%"
    print("ACCEPTANCE PASS: trainable-parameter accounting (closed form exact; 1B preset 0.19%)")


def test_loss_masking_and_toy_finetune(tmp_path):
    examples = synthetic_examples(per_class=8, seed=1)
    tokenizer = SimpleTokenizer.from_corpus(ex["prompt"] for ex in examples)
    torch.manual_seed(3)
    model = TinyDecoder(vocab_size=len(tokenizer), d_model=32, n_heads=2, n_layers=2)
    model.eval()
    batch = build_masked_batch(examples[:8], tokenizer)
    with torch.no_grad():
        logits = model(batch.input_ids, batch.attention_mask)
        reference = float(masked_loss(logits, batch))
        # perturb every prompt-region (and padding) label token id
        rng = torch.Generator().manual_seed(0)
        noise = torch.randint(0, len(tokenizer), batch.labels.shape, generator=rng)
        perturbed = batch.labels.clone()
        perturbed[~batch.loss_mask] = noise[~batch.loss_mask]
        from qlora_tuner.collator import Batch

        batch2 = Batch(batch.input_ids, batch.attention_mask, perturbed, batch.loss_mask)
        assert abs(float(masked_loss(logits, batch2)) - reference) < 1e-7

    path = write_jsonl(tmp_path / "prompts.jsonl", synthetic_examples(per_class=10, seed=2))
    result = finetune(
        path,
        AdapterConfig(r=8, dropout=0.0, target_modules=("q_proj", "k_proj", "v_proj")),
        TrainConfig(epochs=5, batch_size=8, learning_rate=5e-3, weight_decay=0.0, seed=0),
        tmp_path / "run",
    )
    losses = result.train_losses
    assert len(losses) == 5
    assert all(b < a for a, b in zip(losses, losses[1:])), losses
    print("ACCEPTANCE PASS: loss masking invariant + strictly decreasing 5-epoch fine-tune")
