"""
Desk-scale PATE training of synthetic records from privately aggregated teacher gradients.
"""

from topagg.pate.data import Dataset, partition_dataset
from topagg.pate.runner import RoundRecord, RunReport, run_pate
from topagg.pate.student import StudentState, generator_fit, student_update
from topagg.pate.teacher import TeacherModel, teacher_gradient, teacher_step

__all__ = [
    "Dataset",
    "RoundRecord",
    "RunReport",
    "StudentState",
    "TeacherModel",
    "generator_fit",
    "partition_dataset",
    "run_pate",
    "student_update",
    "teacher_gradient",
    "teacher_step",
]
