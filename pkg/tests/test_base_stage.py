"""
Base Stage Test

BaseStage'in ortak execute() akışını sahte bir aşama ile test eder:
progress / event callback'leri ve hata durumunda StageResponse.
"""

from typing import Any, Dict

import pytest

from config.settings import PipelineConfig
from stages.base_stage import BaseStage, StageConfig, StageResponse


class EchoStage(BaseStage):
    """Context'teki değeri ikiye katlayan test aşaması"""

    def __init__(self, fail: bool = False):
        super().__init__(StageConfig(name="echo", description="Doubling the input"), PipelineConfig())
        self.fail = fail

    def process(self, context: Dict[str, Any]) -> StageResponse:
        if self.fail:
            raise ValueError("boom")
        self._update_progress(50, "processing", "doubling")
        return StageResponse(success=True, data={"doubled": context["value"] * 2}, notes=["doubled"])


@pytest.fixture
def recorded():
    seen_progress, seen_events = [], []

    def progress_callback(stage_name, progress, status, current_step):
        seen_progress.append((stage_name, progress, status))

    def event_callback(stage_name, event_type, data, timestamp):
        seen_events.append((stage_name, event_type, data))

    return seen_progress, seen_events, progress_callback, event_callback


def test_successful_execute(recorded):
    progress, events, on_progress, on_event = recorded
    stage = EchoStage()
    stage.set_progress_callback(on_progress)
    stage.set_event_callback(on_event)

    response = stage.execute({"value": 21})

    assert response.success
    assert response.data == {"doubled": 42}
    assert response.metadata["stage_name"] == "echo"
    assert response.processing_time >= 0
    assert [p[1] for p in progress] == [0, 50, 100]
    assert [e[1] for e in events] == ["stage_started", "stage_completed"]
    assert events[0][2] == {"context_keys": ["value"]}


def test_failure_is_returned_not_raised(recorded):
    progress, events, on_progress, on_event = recorded
    stage = EchoStage(fail=True)
    stage.set_progress_callback(on_progress)
    stage.set_event_callback(on_event)

    response = stage.execute({"value": 1})

    assert not response.success
    assert isinstance(response.exception, ValueError)
    assert response.metadata["failure_reason"] == "boom"
    assert "Stage echo failed: boom" in response.errors
    assert events[-1][1] == "stage_failed"
    assert progress[-1][2] == "failed"
    assert stage.get_status()["status"] == "failed"


def test_events_can_be_switched_off(recorded):
    _, events, _, on_event = recorded
    stage = EchoStage()
    stage.config.emit_events = False
    stage.set_event_callback(on_event)
    stage.execute({"value": 1})
    assert events == []


def test_status_without_callbacks():
    stage = EchoStage()
    assert stage.get_status()["status"] == "idle"
    stage.execute({"value": 3})
    status = stage.get_status()
    assert status["progress"] == 100
    assert status["config"]["name"] == "echo"
