"""Pipeline stages 1 and 2: capability annotation and capability embedding."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import (
    CapabilityAnnotation,
    CaptreeError,
    Embedding,
    Instance,
    ProviderError,
    ValidationError,
)
from .gateway import ChatRequest, LlmGateway
from .prompts import ANNOTATION_TEMPLATES, EMBEDDING_PREFIX, PROMPT_VERSION, template_for

log = logging.getLogger(__name__)

DEFAULT_FAILURE_CAP = 0.01


class AnnotationError(CaptreeError):
    """Raised when the failure fraction of a bulk annotation run exceeds the cap."""


@dataclass
class AnnotationRun:
    annotations: list[CapabilityAnnotation]
    failures: dict[str, str] = field(default_factory=dict)


def _annotation_request(instance: Instance, gateway: LlmGateway) -> ChatRequest:
    template = template_for(ANNOTATION_TEMPLATES, instance.benchmark_family, "annotation")
    system, user = template.render(input=instance.input, output=instance.reference_output)
    return ChatRequest(
        system_prompt=system,
        user_prompt=user,
        max_new_tokens=template.max_new_tokens,
        temperature=template.temperature,
        model=gateway.config.chat_model,
    )


def annotate_capability(instance: Instance, gateway: LlmGateway) -> CapabilityAnnotation:
    """One gerund-phrase capability annotation for one instance."""
    phrase = gateway.chat(_annotation_request(instance, gateway)).strip()
    if not phrase:
        raise AnnotationError(f"empty annotation for instance {instance.id!r}")
    return CapabilityAnnotation(
        instance_id=instance.id,
        phrase=phrase,
        annotator_model=gateway.config.chat_model,
        prompt_version=gateway.config.prompt_version,
    )


def embed_capability(annotation: CapabilityAnnotation, gateway: LlmGateway) -> Embedding:
    """Embed the fixed prefix plus the annotated phrase."""
    if not annotation.phrase.strip():
        raise ValidationError(f"cannot embed empty phrase for {annotation.instance_id!r}")
    matrix = gateway.embed([EMBEDDING_PREFIX + annotation.phrase])
    return Embedding(annotation.instance_id, matrix[0], model_tag=gateway.config.embed_model)


def annotate_all(
    instances: list[Instance],
    gateway: LlmGateway,
    failure_cap: float = DEFAULT_FAILURE_CAP,
) -> AnnotationRun:
    """Annotate every instance; reruns pick up missing results from the cache.

    Raises AnnotationError naming the failed ids when the failure fraction
    exceeds ``failure_cap``.
    """
    requests = [_annotation_request(inst, gateway) for inst in instances]
    results = gateway.chat_many(requests, collect_errors=True)
    run = AnnotationRun(annotations=[])
    provider_failures = 0
    for inst, result in zip(instances, results):
        if isinstance(result, Exception):
            run.failures[inst.id] = str(result)
            provider_failures += isinstance(result, ProviderError)
            continue
        phrase = result.strip()
        if not phrase:
            run.failures[inst.id] = "empty completion"
            continue
        run.annotations.append(
            CapabilityAnnotation(
                instance_id=inst.id,
                phrase=phrase,
                annotator_model=gateway.config.chat_model,
                prompt_version=gateway.config.prompt_version,
            )
        )
    if instances and len(run.failures) / len(instances) > failure_cap:
        failed = ", ".join(sorted(run.failures))
        message = (
            f"{len(run.failures)}/{len(instances)} annotations failed (cap {failure_cap:.0%}): {failed}"
        )
        # a run that failed purely on provider errors should surface as one
        if provider_failures == len(run.failures):
            raise ProviderError(message)
        raise AnnotationError(message)
    if run.failures:
        log.warning("annotation failures within cap: %s", sorted(run.failures))
    return run


def embed_all(annotations: list[CapabilityAnnotation], gateway: LlmGateway) -> list[Embedding]:
    """One embedding per annotation, batched through the gateway."""
    if not annotations:
        return []
    matrix = gateway.embed([EMBEDDING_PREFIX + a.phrase for a in annotations])
    model_tag = gateway.config.embed_model
    return [Embedding(a.instance_id, matrix[i], model_tag) for i, a in enumerate(annotations)]


def embeddings_by_id(embeddings: list[Embedding]) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for emb in embeddings:
        out[emb.instance_id] = emb.vector
    return out


__all__ = [
    "AnnotationError",
    "AnnotationRun",
    "PROMPT_VERSION",
    "annotate_all",
    "annotate_capability",
    "embed_all",
    "embed_capability",
    "embeddings_by_id",
]
