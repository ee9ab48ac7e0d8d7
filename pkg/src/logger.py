import logging
import os
from logging.handlers import RotatingFileHandler

from src.config import settings

if not os.path.exists(settings.log_dir):
    os.makedirs(settings.log_dir)

log_formatter = logging.Formatter("%(asctime)s - %(levelname)s - %(message)s")

file_handler = RotatingFileHandler(
    os.path.join(settings.log_dir, "gibc_cq.log"),
    maxBytes=settings.log_file_max_bytes,
    backupCount=settings.log_backup_count,
)
file_handler.setFormatter(log_formatter)

console_handler = logging.StreamHandler()
console_handler.setFormatter(log_formatter)

logger = logging.getLogger("gibc_cq_logger")
logger.setLevel(settings.log_level)
logger.addHandler(file_handler)
logger.addHandler(console_handler)


def get_logger():
    return logger
