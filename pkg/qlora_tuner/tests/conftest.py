import pytest

from qlora_tuner import SimpleTokenizer

from qlora_helpers import synthetic_examples


@pytest.fixture
def examples():
    return synthetic_examples()


@pytest.fixture
def tokenizer(examples):
    return SimpleTokenizer.from_corpus(ex["prompt"] for ex in examples)
