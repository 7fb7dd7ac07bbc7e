"""
Celery application configuration.
"""
from celery import Celery

from app.services.config_service import config_service

# Create Celery app
celery_app = Celery(
    "traptp",
    broker=config_service.get_setting("celery_broker_url"),
    backend="rpc://",  # batches return their rows to the dispatcher
    include=["worker.game_tasks"],
)

# Celery configuration
celery_app.conf.update(
    task_serializer="json",
    accept_content=["json"],
    result_serializer="json",
    timezone="UTC",
    enable_utc=True,
    task_track_started=True,
    task_time_limit=60 * 60,  # 1 hour
    task_soft_time_limit=55 * 60,  # 55 minutes
    worker_prefetch_multiplier=1,
    worker_max_tasks_per_child=100,
    task_always_eager=config_service.get_setting("celery_eager", False),
    task_eager_propagates=True,
    # Enhanced logging
    worker_log_format="[%(asctime)s: %(levelname)s/%(processName)s] %(message)s",
    worker_task_log_format="[%(asctime)s: %(levelname)s/%(processName)s] %(task_name)s[%(task_id)s]: %(message)s",
)

# Queue configuration
celery_app.conf.task_routes = {
    "games.*": {"queue": "games"},
}
