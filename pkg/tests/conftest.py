from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from captree.core import EvalResult, Instance
from captree.gateway import LlmGateway, MockProvider, ProviderConfig

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


def make_instances(n: int, family: str = "math", prefix: str = "i") -> list[Instance]:
    return [
        Instance(
            id=f"{prefix}{k:04d}",
            input=f"problem statement {prefix}{k:04d}",
            reference_output=f"worked answer {prefix}{k:04d}",
            benchmark_family=family,
        )
        for k in range(n)
    ]


def binary_eval(instances: list[Instance], correct_ids: set[str]) -> EvalResult:
    return EvalResult(
        kind="binary",
        per_instance={inst.id: int(inst.id in correct_ids) for inst in instances},
    )


def random_unit_vectors(n: int, dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    matrix = rng.standard_normal((n, dim))
    return matrix / np.linalg.norm(matrix, axis=1, keepdims=True)


@pytest.fixture
def gateway() -> LlmGateway:
    return LlmGateway(MockProvider(seed=7), ProviderConfig())


@pytest.fixture
def provider_and_gateway() -> tuple[MockProvider, LlmGateway]:
    provider = MockProvider(seed=7)
    return provider, LlmGateway(provider, ProviderConfig())
