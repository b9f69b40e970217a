"""Task label spaces for the three CrisisMMD classification tasks.

Task 2 groups the three sparse person-centred categories into one class
and leaves five humanitarian classes; not_humanitarian rows are excluded
from that task's label space entirely.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import LabelError


@dataclass(frozen=True)
class TaskLabels:
    task_id: int
    mapping: dict[str, int]
    class_names: tuple[str, ...]
    excluded: frozenset[str] = frozenset()

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


TASK_LABELS: dict[int, TaskLabels] = {
    1: TaskLabels(
        task_id=1,
        mapping={"informative": 0, "not_informative": 1},
        class_names=("informative", "not_informative"),
    ),
    2: TaskLabels(
        task_id=2,
        mapping={
            "infrastructure_and_utility_damage": 0,
            "vehicle_damage": 1,
            "rescue_volunteering_or_donation_effort": 2,
            "affected_individuals": 3,
            "injured_or_dead_people": 3,
            "missing_or_found_people": 3,
            "other_relevant_information": 4,
        },
        class_names=(
            "infrastructure_and_utility_damage",
            "vehicle_damage",
            "rescue_volunteering_or_donation_effort",
            "affected_individuals",
            "other_relevant_information",
        ),
        excluded=frozenset({"not_humanitarian"}),
    ),
    3: TaskLabels(
        task_id=3,
        mapping={"severe_damage": 0, "mild_damage": 1, "little_or_no_damage": 2},
        class_names=("severe_damage", "mild_damage", "little_or_no_damage"),
    ),
}


def normalize_category(raw: str) -> str:
    return raw.strip().lower().replace(" ", "_")


def map_category(labels: TaskLabels, raw_category: str) -> int | None:
    """Class index for a raw category; None if the category is excluded."""
    category = normalize_category(raw_category)
    if category in labels.excluded:
        return None
    if category not in labels.mapping:
        raise LabelError(f"unknown raw category {raw_category!r} for task {labels.task_id}")
    return labels.mapping[category]
