import os
from dataclasses import dataclass

from dotenv import load_dotenv

load_dotenv()

JACOBI_NODES = int(os.getenv('VEXBS_JACOBI_NODES', '32'))
LEGENDRE_NODES = int(os.getenv('VEXBS_LEGENDRE_NODES', '8'))
GRADING_LEVELS = int(os.getenv('VEXBS_GRADING_LEVELS', '24'))
ORACLE_CAP = int(os.getenv('VEXBS_ORACLE_CAP', '4096'))
OUTPUT_PATH = os.getenv('VEXBS_OUTPUT', 'convergence.csv')
LOG_LEVEL = os.getenv('VEXBS_LOG_LEVEL', 'INFO')
API_MAX_STEPS = int(os.getenv('VEXBS_API_MAX_STEPS', '256'))
API_MAX_NODES = int(os.getenv('VEXBS_API_MAX_NODES', '128'))


@dataclass(frozen=True)
class QuadratureSettings:
    """Rule sizes used for the kernel q, its derivative and the lag weights"""
    jacobi_nodes: int = JACOBI_NODES
    legendre_nodes: int = LEGENDRE_NODES
    grading_levels: int = GRADING_LEVELS

    @classmethod
    def from_env(cls) -> "QuadratureSettings":
        return cls()

    def override(self, jacobi_nodes=None, legendre_nodes=None) -> "QuadratureSettings":
        return QuadratureSettings(
            jacobi_nodes=jacobi_nodes or self.jacobi_nodes,
            legendre_nodes=legendre_nodes or self.legendre_nodes,
            grading_levels=self.grading_levels,
        )

    def to_dict(self):
        return {
            "jacobi_nodes": self.jacobi_nodes,
            "legendre_nodes": self.legendre_nodes,
            "grading_levels": self.grading_levels,
        }
