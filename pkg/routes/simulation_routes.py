from flask import Blueprint, request, jsonify
from pydantic import ValidationError
import logging
import traceback

from models.schemas import Command, RunConfig
from services.simulation_service import SimulationService
from utils.errors import ConfigError, LieLangevinError, OutputError

logger = logging.getLogger(__name__)

simulation_bp = Blueprint('simulation', __name__)
simulation_service = SimulationService()


def _summary_response(cfg: RunConfig):
    summary = simulation_service.run(cfg)
    # 진단 실패도 정상 응답 (passed/exit_code로 구분)
    return jsonify(summary.model_dump(mode='json')), 200


@simulation_bp.route('/run', methods=['POST'])
def run_simulation():
    """
    RunConfig JSON을 받아 명령 실행

    Body:
        RunConfig JSON (command, group, potential, ...)

    Returns:
        RunSummary JSON
    """
    try:
        body = request.get_json(silent=True)
        if not isinstance(body, dict):
            return jsonify({'error': 'JSON object body is required'}), 400

        cfg = RunConfig.model_validate(body)
        return _summary_response(cfg)

    except ValidationError as e:
        return jsonify({
            'error': 'Invalid run configuration',
            'detail': [{'key': '.'.join(str(p) for p in err['loc']), 'message': err['msg']}
                       for err in e.errors()]
        }), 400

    except ConfigError as e:
        return jsonify({'error': 'Invalid run configuration', 'detail': str(e)}), 400

    except OutputError as e:
        logger.error("❌ Output error in run_simulation: %s", e)
        return jsonify({'error': 'Could not write artifacts', 'detail': str(e)}), 500

    except LieLangevinError as e:
        return jsonify({'error': type(e).__name__, 'detail': str(e)}), 422

    except ValueError as e:
        return jsonify({'error': 'Invalid run configuration', 'detail': str(e)}), 400

    except Exception as e:
        logger.error("❌ Error in run_simulation: %s", e)
        logger.error(traceback.format_exc())
        return jsonify({
            'error': 'Internal server error',
            'detail': str(e)
        }), 500


@simulation_bp.route('/check', methods=['GET'])
def check_group():
    """
    대수/기하 불변식 검사

    Query Parameters:
        group (str): 군 이름 (기본값 so3, "all"이면 지원 군 전체)
        metric_kind (str): frobenius / negative_killing

    Returns:
        RunSummary JSON (checks 필드에 그룹별 결과)
    """
    try:
        cfg = RunConfig(
            command=Command.CHECK,
            group=request.args.get('group', 'so3'),
            metric_kind=request.args.get('metric_kind', 'frobenius'),
        )
        return _summary_response(cfg)

    except ValidationError as e:
        return jsonify({
            'error': 'Invalid group',
            'detail': [err['msg'] for err in e.errors()]
        }), 400

    except ConfigError as e:
        return jsonify({'error': 'Invalid group', 'detail': str(e)}), 400

    except OutputError as e:
        return jsonify({'error': 'Could not write artifacts', 'detail': str(e)}), 500

    except LieLangevinError as e:
        return jsonify({'error': type(e).__name__, 'detail': str(e)}), 422

    except Exception as e:
        logger.error("❌ Error in check_group: %s", e)
        logger.error(traceback.format_exc())
        return jsonify({
            'error': 'Internal server error',
            'detail': str(e)
        }), 500
