from flask import Blueprint, request, jsonify
import logging

from config import API_MAX_NODES, API_MAX_STEPS
from exceptions import ConfigurationError, DomainError, NumericalError
from harness import ExperimentConfig, convergence_study, example_catalogue, example_spec
from model_transform import reconstruct_option_price
from solver import solve_all

logger = logging.getLogger(__name__)

pricing_bp = Blueprint('pricing', __name__)


def _size(data, key, default, limit=API_MAX_STEPS):
    """Read an integer size from the request body and enforce the API cap"""
    raw = data.get(key, default)
    if raw is None:
        return None
    try:
        value = int(raw)
    except (TypeError, ValueError):
        raise ConfigurationError(f"'{key}' must be an integer")
    if value > limit:
        raise ConfigurationError(f"'{key}'={value} exceeds the limit of {limit}")
    return value


def _experiment(data, default_N, default_M):
    try:
        alpha0 = float(data.get('alpha0', 0.4))
        levels = int(data.get('levels', 1))
    except (TypeError, ValueError):
        raise ConfigurationError("'alpha0' must be a number and 'levels' an integer")
    return ExperimentConfig(
        example_id=data.get('example', '1'),
        alpha0=alpha0,
        N=_size(data, 'N', default_N),
        M=_size(data, 'M', default_M),
        refine_axis=data.get('axis', 'time'),
        refine_levels=levels,
        jacobi_nodes=_size(data, 'jacobi_nodes', None, API_MAX_NODES),
        legendre_nodes=_size(data, 'legendre_nodes', None, API_MAX_NODES),
    )


def _error_response(e):
    if isinstance(e, (ConfigurationError, DomainError)):
        return jsonify({'success': False, 'error': str(e)}), 400
    if isinstance(e, NumericalError):
        return jsonify({'success': False, 'error': str(e)}), 422
    logger.error(f"Unexpected pricing error: {e}")
    return jsonify({'success': False, 'error': 'Internal error'}), 500


@pricing_bp.route('/examples', methods=['GET'])
def get_examples():
    """List the preset problems"""
    return jsonify({'success': True, 'examples': example_catalogue()})


@pricing_bp.route('/price', methods=['POST'])
def price_option():
    """Solve a preset and evaluate option values at the requested spots"""
    try:
        data = request.get_json(silent=True) or {}
        config = _experiment(data, 32, 32)
        if config.example_id == 'custom':
            raise ConfigurationError("custom problems are not available over HTTP")
        spots = data.get('spots')
        if not spots:
            raise ConfigurationError("'spots' must be a non-empty list of asset prices")
        time = float(data.get('time', 0.0))

        spec = example_spec(config.example_id)
        grid = solve_all(config.build_problem(), config.N, config.M, config.settings())
        surface = reconstruct_option_price(grid, spec)
        prices = surface.price([float(s) for s in spots], time)

        return jsonify({
            'success': True,
            'example': config.example_id,
            'time': time,
            'prices': [{'spot': float(s), 'value': float(v)} for s, v in zip(spots, prices)],
            'meta': {
                'N': grid.N,
                'M': grid.M,
                'alpha0': config.alpha0,
                'stability_norm': grid.meta['stability_norm'],
                'gronwall_ok': grid.meta['gronwall_ok'],
                'diagnostics': grid.meta['diagnostics'],
            }
        })

    except Exception as e:
        return _error_response(e)


@pricing_bp.route('/convergence', methods=['POST'])
def run_convergence():
    """Run a small convergence ladder and return its rows"""
    try:
        data = request.get_json(silent=True) or {}
        config = _experiment(data, 8, 16)
        largest = max(config.N, config.M) * 2 ** config.refine_levels
        if largest > API_MAX_STEPS:
            raise ConfigurationError(f"ladder reaches {largest} steps, above the limit of {API_MAX_STEPS}")

        report = convergence_study(config)
        frame = report.to_frame().astype(object)
        rows = frame.where(frame.notna(), None).to_dict(orient='records')

        return jsonify({
            'success': True,
            'theory_order': report.theory_order,
            'rows': rows,
            'diagnostics': report.diagnostics,
        })

    except Exception as e:
        return _error_response(e)
