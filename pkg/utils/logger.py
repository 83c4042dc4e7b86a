"""
DroneCAST Logging System
Merkezi loglama altyapısı.
"""
import logging
import sys
from functools import wraps
from typing import Optional


class ColoredFormatter(logging.Formatter):
    """Renkli log formatı"""

    COLORS = {
        'DEBUG': '\033[36m',     # Cyan
        'INFO': '\033[32m',      # Green
        'WARNING': '\033[33m',   # Yellow
        'ERROR': '\033[31m',     # Red
        'CRITICAL': '\033[35m',  # Magenta
        'RESET': '\033[0m'
    }

    def format(self, record):
        color = self.COLORS.get(record.levelname, self.COLORS['RESET'])
        reset = self.COLORS['RESET']
        record = logging.makeLogRecord(record.__dict__)
        record.levelname = f"{color}{record.levelname}{reset}"
        return super().format(record)


class SimLogger:
    """Simülatör için özelleştirilmiş logger"""

    _instance: Optional['SimLogger'] = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
            cls._instance._initialized = False
        return cls._instance

    def __init__(self):
        if self._initialized:
            return

        self._initialized = True
        self.logger = logging.getLogger("DroneCAST")
        self.logger.setLevel(logging.DEBUG)
        self.logger.propagate = False
        self.configure()

    def configure(self, level: Optional[str] = None, log_file: Optional[str] = None,
                  to_console: Optional[bool] = None):
        """Handler'ları config'e göre (yeniden) kur"""
        # Import config here to avoid circular import
        from config import config

        level_name = (level or config.log_level).upper()
        log_file = log_file if log_file is not None else config.log_file
        to_console = config.log_to_console if to_console is None else to_console

        for handler in list(self.logger.handlers):
            handler.close()
            self.logger.removeHandler(handler)

        if log_file:
            file_handler = logging.FileHandler(log_file, encoding='utf-8')
            file_handler.setLevel(getattr(logging, level_name, logging.INFO))
            file_handler.setFormatter(logging.Formatter(
                '%(asctime)s | %(levelname)-8s | %(name)s.%(funcName)s:%(lineno)d | %(message)s',
                datefmt='%Y-%m-%d %H:%M:%S'
            ))
            self.logger.addHandler(file_handler)

        if to_console:
            console_handler = logging.StreamHandler(sys.stderr)
            console_handler.setLevel(getattr(logging, level_name, logging.INFO))
            console_handler.setFormatter(ColoredFormatter(
                '%(asctime)s | %(levelname)s | %(message)s',
                datefmt='%H:%M:%S'
            ))
            self.logger.addHandler(console_handler)

        if not self.logger.handlers:
            self.logger.addHandler(logging.NullHandler())

    def debug(self, msg: str, **kwargs):
        self.logger.debug(msg, extra=kwargs)

    def info(self, msg: str, **kwargs):
        self.logger.info(msg, extra=kwargs)

    def warning(self, msg: str, **kwargs):
        self.logger.warning(msg, extra=kwargs)

    def error(self, msg: str, exc_info: bool = False, **kwargs):
        self.logger.error(msg, exc_info=exc_info, extra=kwargs)

    def critical(self, msg: str, exc_info: bool = True, **kwargs):
        self.logger.critical(msg, exc_info=exc_info, extra=kwargs)

    def run_start(self, name: str, seed: int, duration: float, drones: int):
        """Koşu başlangıcını logla"""
        self.info(f"▶ RUN_START | {name} | seed={seed} duration={duration}s drones={drones}")

    def run_end(self, name: str, transmissions: int, per: float):
        """Koşu bitişini logla"""
        self.info(f"■ RUN_END | {name} | tx={transmissions} per={per:.4f}")

    def ca_transition(self, t: float, drone_id: int, transition: str, partner: Optional[int]):
        """Çarpışma önleme durum geçişini logla"""
        self.info(f"⚠ CA | t={t:.2f} | drone={drone_id} | {transition} | partner={partner}")

    def validation_failed(self, source: str, problems: list):
        """Senaryo doğrulama hatalarını logla"""
        for location, message in problems:
            self.warning(f"✗ INVALID | {source} | {location}: {message}")

    def tesla_event(self, t: float, receiver: int, interval: int, status: str):
        """TESLA doğrulama sonucunu logla"""
        self.debug(f"🔑 TESLA | t={t:.2f} | rx={receiver} | i={interval} | {status}")


def log_execution(func):
    """Fonksiyon çalışmasını loglayan decorator"""
    @wraps(func)
    def wrapper(*args, **kwargs):
        logger = get_logger()
        func_name = func.__name__
        logger.debug(f"Executing {func_name} kwargs={list(kwargs.keys())}")
        try:
            result = func(*args, **kwargs)
            logger.debug(f"Completed {func_name}")
            return result
        except Exception as e:
            logger.error(f"Error in {func_name}: {e}", exc_info=True)
            raise
    return wrapper


def get_logger() -> SimLogger:
    """Global logger instance döndür"""
    return SimLogger()
