#!/usr/bin/env python3
"""
Скрипт проверки готовности окружения симулятора TrapTP
Проверяет тестовые векторы MAC, брокер Celery и сервер вычислений
"""

import asyncio
import logging
import sys
from pathlib import Path

# Добавляем корневую директорию проекта в Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from app.services.config_service import config_service  # noqa: E402
from app.services.mac_service import mac_service  # noqa: E402
from app.transport.protocol import PROTOCOL_VERSION, FrameKind, check_hello, expect, write_frame  # noqa: E402

# Настройка логирования
logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")
logger = logging.getLogger(__name__)


def check_mac_vectors():
    """Проверяет тестовые векторы HMAC-SHA256-128"""
    failures = mac_service.check_vectors()
    if failures:
        logger.error(f"❌ Тестовые векторы MAC не прошли: {', '.join(failures)}")
        return False
    logger.info("✅ Тестовые векторы MAC прошли")
    return True


def check_broker():
    """Проверяет доступность брокера Celery"""
    try:
        from worker.celery_app import celery_app

        with celery_app.connection_for_write() as conn:
            conn.ensure_connection(max_retries=1)

        logger.info("✅ Брокер Celery доступен")
        return True
    except Exception as e:
        logger.error(f"❌ Брокер Celery недоступен: {e}")
        return False


async def _hello(host: str, port: int) -> None:
    reader, writer = await asyncio.wait_for(asyncio.open_connection(host, port), timeout=5)
    try:
        await write_frame(writer, FrameKind.HELLO, PROTOCOL_VERSION)
        check_hello(await asyncio.wait_for(expect(reader, FrameKind.HELLO, 1024), timeout=5))
    finally:
        writer.close()
        await writer.wait_closed()


def check_server():
    """Проверяет рукопожатие с сервером вычислений"""
    host, port = config_service.settings.host_port
    try:
        asyncio.run(_hello(host, port))
        logger.info(f"✅ Сервер вычислений отвечает на {host}:{port}")
        return True
    except Exception as e:
        logger.warning(f"⚠️ Сервер вычислений недоступен на {host}:{port}: {e}")
        return False


def main():
    """Основная функция проверки"""
    logger.info("🔍 Запуск проверки готовности окружения TrapTP")

    checks = [
        ("Векторы MAC", check_mac_vectors),
        ("Брокер Celery", check_broker),
        ("Сервер вычислений", check_server),
    ]

    results = []
    for name, check_func in checks:
        logger.info(f"Проверка {name}...")
        result = check_func()
        results.append((name, result))

        if not result and name == "Векторы MAC":
            logger.error(f"❌ Критический компонент {name} не прошёл проверку")
            sys.exit(1)

    # Выводим итоговый отчет
    logger.info("\n📊 Результаты проверки:")
    for name, result in results:
        status = "✅ OK" if result else "❌ FAIL"
        logger.info(f"  {name}: {status}")

    failed_checks = [name for name, result in results if not result]
    if failed_checks:
        logger.warning(f"⚠️ Недоступные компоненты: {', '.join(failed_checks)}")
    else:
        logger.info("🎉 Все компоненты окружения готовы к работе!")


if __name__ == "__main__":
    main()
