"""Prosecution and defense argument extraction."""

from __future__ import annotations

from lexsolve.agents.base import (
    DEFENSE,
    DETERMINISTIC,
    EXTERNAL,
    PROSECUTOR,
    ROLES,
    ArgumentTuple,
    Cluster,
    ExtractorConfig,
    MergedArguments,
    cluster_debate,
    load_clusters,
    merge_arguments,
)
from lexsolve.agents.extractor import deterministic_extract
from lexsolve.case_model import CaseRecord
from lexsolve.errors import EmptyInput


def extract_argument(case: CaseRecord, role: str, config: ExtractorConfig | None = None, client=None) -> ArgumentTuple:
    """Extract one side's argument tuple.

    The external backend needs a :class:`~lexsolve.agents.client.ServiceClient`;
    one is built from ``config`` when not supplied.
    """
    config = config or ExtractorConfig()
    if not case.narrative.strip():
        raise EmptyInput(f"case {case.case_id} has an empty narrative")
    if config.backend == DETERMINISTIC:
        return deterministic_extract(case, role)
    from lexsolve.agents.client import ServiceClient, external_extract

    owned = client is None
    client = client or ServiceClient(config)
    try:
        return external_extract(case, role, client)
    finally:
        if owned:
            client.close()


__all__ = [
    "DEFENSE",
    "DETERMINISTIC",
    "EXTERNAL",
    "PROSECUTOR",
    "ROLES",
    "ArgumentTuple",
    "Cluster",
    "ExtractorConfig",
    "MergedArguments",
    "cluster_debate",
    "deterministic_extract",
    "extract_argument",
    "load_clusters",
    "merge_arguments",
]
