"""
Logging setup
Налаштування логування для CLI та тренування
"""

import logging
from pathlib import Path
from typing import Optional

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(level: int = logging.INFO, log_dir: Optional[str] = None,
                  filename: str = "run.log") -> logging.Logger:
    """
    Налаштувати кореневий логер

    Parameters:
    -----------
    level : int
        Рівень логування
    log_dir : str, optional
        Якщо вказано, логи також пишуться у файл у цій директорії
    filename : str
        Назва лог-файлу

    Returns:
    --------
    root : logging.Logger
    """
    logging.basicConfig(level=level, format=LOG_FORMAT)
    root = logging.getLogger()

    if log_dir is not None:
        path = Path(log_dir)
        path.mkdir(parents=True, exist_ok=True)
        log_file = (path / filename).resolve()

        # Не дублювати файловий handler при повторному виклику
        for handler in root.handlers:
            if isinstance(handler, logging.FileHandler) and \
                    Path(handler.baseFilename) == log_file:
                return root

        file_handler = logging.FileHandler(log_file, encoding='utf-8')
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(file_handler)

    return root


def log_banner(logger: logging.Logger, title: str):
    """Вивести заголовок секції у стилі pipeline"""
    logger.info("=" * 70)
    logger.info(title)
    logger.info("=" * 70)
