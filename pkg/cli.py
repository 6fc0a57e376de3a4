"""
Command-line entry point for convergence studies
"""

import logging
import sys

import click

from config import LOG_LEVEL, OUTPUT_PATH
from exceptions import ConfigurationError, DomainError, NumericalError, SolverError
from harness import ExperimentConfig, convergence_study, emit_report, oracle_cross_check

logger = logging.getLogger(__name__)

EXIT_CONFIGURATION = 2
EXIT_NUMERICAL = 3


@click.command()
@click.option("--example", "example_id", type=click.Choice(["1", "2", "3", "call"]), default="1",
              show_default=True, help="Preset problem")
@click.option("--alpha0", type=float, default=0.4, show_default=True, help="alpha(0), in (0, 1)")
@click.option("--axis", type=click.Choice(["time", "space"]), default="time", show_default=True)
@click.option("--N", "n_steps", type=int, default=16, show_default=True, help="Coarsest number of time steps")
@click.option("--M", "n_cells", type=int, default=32, show_default=True, help="Coarsest number of cells")
@click.option("--levels", type=int, default=4, show_default=True, help="Rows in the refinement ladder")
@click.option("--out", "output_path", type=click.Path(dir_okay=False), default=OUTPUT_PATH,
              show_default=True, help="CSV output path")
@click.option("--jacobi-nodes", type=int, default=None, help="Override the Gauss-Jacobi rule size")
@click.option("--legendre-nodes", type=int, default=None, help="Override the Gauss-Legendre rule size")
@click.option("--oracle", is_flag=True, help="Cross-check against the dense oracle at small sizes")
def main(example_id, alpha0, axis, n_steps, n_cells, levels, output_path,
         jacobi_nodes, legendre_nodes, oracle):
    """Run a two-mesh convergence study and write it as CSV"""
    logging.basicConfig(level=LOG_LEVEL, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        config = ExperimentConfig(
            example_id=example_id,
            alpha0=alpha0,
            N=n_steps,
            M=n_cells,
            refine_axis=axis,
            refine_levels=levels,
            output_path=output_path,
            jacobi_nodes=jacobi_nodes,
            legendre_nodes=legendre_nodes,
        )
        if oracle:
            for check in oracle_cross_check(config.build_problem(), settings=config.settings()):
                click.echo(f"oracle N={check['N']} M={check['M']}: "
                           f"max difference {check['max_difference']:.3e}")
        report = convergence_study(config)
        emit_report(report, config.output_path)
        for note in report.diagnostics:
            click.echo(f"warning: {note}", err=True)
    except (ConfigurationError, DomainError, OSError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_CONFIGURATION)
    except NumericalError as e:
        click.echo(f"numerical failure: {e}", err=True)
        sys.exit(EXIT_NUMERICAL)
    except SolverError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_CONFIGURATION)


if __name__ == "__main__":
    main()
