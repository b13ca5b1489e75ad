import logging
import os
from dotenv import load_dotenv

load_dotenv()


class Config:
    # Flask 설정
    DEBUG = os.getenv('FLASK_DEBUG', 'False') == 'True'

    # 로그 설정
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
    LOG_FORMAT = '%(asctime)s - %(levelname)s - %(name)s - %(message)s'

    # 결과물 저장 경로 (CLI/API 공통)
    OUTPUT_DIR = os.getenv('LIE_LANGEVIN_OUTPUT_DIR', './output')

    # 군 위로의 재투영 주기 (step 단위)
    REPROJECT_EVERY = int(os.getenv('REPROJECT_EVERY', '100'))

    # 앙상블 병렬 처리 (1이면 직렬 실행)
    DEFAULT_WORKERS = int(os.getenv('DEFAULT_WORKERS', '1'))

    # Gibbs oracle: 샘플 하나당 최대 제안 횟수
    ORACLE_MAX_PROPOSALS = int(os.getenv('ORACLE_MAX_PROPOSALS', '10000'))

    # 허용 오차
    ALGEBRA_TOL = float(os.getenv('ALGEBRA_TOL', '1e-12'))
    GROUP_TOL = float(os.getenv('GROUP_TOL', '1e-10'))

    @staticmethod
    def validate():
        """필수 설정 검증"""
        if Config.REPROJECT_EVERY < 1:
            raise ValueError("REPROJECT_EVERY must be a positive integer")
        if Config.DEFAULT_WORKERS < 1:
            raise ValueError("DEFAULT_WORKERS must be a positive integer")
        if Config.ORACLE_MAX_PROPOSALS < 1:
            raise ValueError("ORACLE_MAX_PROPOSALS must be a positive integer")

        # 출력 디렉토리 생성
        os.makedirs(Config.OUTPUT_DIR, exist_ok=True)


def configure_logging(level=None):
    """Configure root logging once for CLI and API entry points."""
    logging.basicConfig(
        level=(level or Config.LOG_LEVEL).upper(),
        format=Config.LOG_FORMAT,
    )
