"""Retry loop shared by the HTTP embedding and chat backends."""

import logging
import time
from dataclasses import dataclass

import httpx

logger = logging.getLogger(__name__)

RETRYABLE_STATUSES = {429, 500, 502, 503, 504}


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    base_delay: float = 0.25
    multiplier: float = 2.0


class _TransientStatus(Exception):
    def __init__(self, status_code):
        super().__init__(f"transient HTTP status {status_code}")
        self.status_code = status_code


def request_with_retries(send, policy, error_cls):
    """Run ``send()`` (returning an httpx.Response) under the retry policy.

    Timeouts, transport failures and 429/5xx responses are retried with
    exponential backoff; other non-2xx statuses fail immediately.  After the
    final attempt the last failure is raised as ``error_cls``.
    """
    delay = policy.base_delay
    last_error = None
    for attempt in range(1, policy.attempts + 1):
        try:
            response = send()
            if response.status_code in RETRYABLE_STATUSES:
                raise _TransientStatus(response.status_code)
            if response.status_code >= 400:
                raise error_cls(
                    f"backend returned HTTP {response.status_code}: {response.text[:200]}"
                )
            return response
        except (httpx.TimeoutException, httpx.TransportError, _TransientStatus) as exc:
            last_error = exc
            if attempt == policy.attempts:
                break
            logger.warning(
                "backend request failed (%s), retrying in %.2fs (attempt %d/%d)",
                exc,
                delay,
                attempt,
                policy.attempts,
            )
            time.sleep(delay)
            delay *= policy.multiplier
    raise error_cls(f"backend unreachable after {policy.attempts} attempts: {last_error}")
