"""
Base Stage Class for the clumped nuclei splitter

Bu sınıf tüm pipeline aşamalarının temelini oluşturur ve şu özellikleri sağlar:
- Ortak execute() akışı: zamanlama ve hata yakalama
- Progress tracking
- Event emission için pipeline ile iletişim
- Başarısız aşamada orijinal istisnanın saklanması (stage attribution)

Aşamalar saf hesaplamadır; aynı girdi her zaman aynı çıktıyı verir, bu
yüzden yeniden deneme (retry) yapılmaz.
"""

import logging
import time
import traceback
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Any, Callable, Dict, List, Optional

from config.settings import PipelineConfig


@dataclass
class StageResponse:
    """Aşama yanıt yapısı"""
    success: bool
    data: Dict[str, Any]
    notes: List[str] = field(default_factory=list)
    errors: List[str] = field(default_factory=list)
    processing_time: float = 0.0
    metadata: Dict[str, Any] = field(default_factory=dict)
    exception: Optional[BaseException] = field(default=None, repr=False)


@dataclass
class StageConfig:
    """Aşama konfigürasyon yapısı"""
    name: str
    description: str
    emit_events: bool = True


class BaseStage(ABC):
    """
    Tüm pipeline aşamalarının temel sınıfı

    Her aşama bu sınıftan türetilir ve process() metodunu implement eder.
    process() context sözlüğünü okur, yeni anahtarlarını StageResponse.data
    içinde döner; orchestrator bunları context'e ekler.
    """

    def __init__(self, config: StageConfig, pipeline_config: PipelineConfig):
        self.config = config
        self.pipeline_config = pipeline_config
        self.logger = logging.getLogger(f"stage.{config.name}")

        self._progress = 0
        self._status = "idle"
        self._current_step = ""

        self._progress_callback: Optional[Callable] = None
        self._event_callback: Optional[Callable] = None

    @property
    def name(self) -> str:
        return self.config.name

    def set_progress_callback(self, callback: Optional[Callable]):
        """Pipeline orchestrator tarafından progress callback set edilir"""
        self._progress_callback = callback

    def set_event_callback(self, callback: Optional[Callable]):
        self._event_callback = callback

    def _update_progress(self, progress: int, status: str, current_step: str = ""):
        self._progress = progress
        self._status = status
        self._current_step = current_step

        if self._progress_callback:
            self._progress_callback(
                stage_name=self.config.name,
                progress=progress,
                status=status,
                current_step=current_step,
            )
        self.logger.debug(f"Progress: {progress}% - {status} - {current_step}")

    def _emit_event(self, event_type: str, data: Dict[str, Any]):
        if self._event_callback and self.config.emit_events:
            self._event_callback(
                stage_name=self.config.name,
                event_type=event_type,
                data=data,
                timestamp=datetime.now().isoformat(),
            )

    @abstractmethod
    def process(self, context: Dict[str, Any]) -> StageResponse:
        """
        Her aşama bu metodu implement etmelidir

        Args:
            context: Önceki aşamaların ürettiği veriler

        Returns:
            StageResponse: Standardize edilmiş aşama yanıtı
        """

    def execute(self, context: Dict[str, Any]) -> StageResponse:
        """Ana execution metodu; orchestrator tarafından çağrılır"""
        started = time.perf_counter()
        try:
            self._update_progress(0, "starting", self.config.description)
            self._emit_event("stage_started", {"context_keys": sorted(context)})

            response = self.process(context)

            elapsed = time.perf_counter() - started
            response.processing_time = elapsed
            response.metadata.setdefault("stage_name", self.config.name)
            self._emit_event("stage_completed", {"processing_time": elapsed, "success": response.success})
            self._update_progress(100, "completed", self.config.description)
            return response

        except Exception as exc:
            elapsed = time.perf_counter() - started
            error_msg = f"Stage {self.config.name} failed: {exc}"
            self.logger.error(error_msg)
            self.logger.debug(traceback.format_exc())

            self._emit_event("stage_failed", {
                "error": error_msg,
                "processing_time": elapsed,
                "traceback": traceback.format_exc(),
            })
            self._update_progress(100, "failed", f"Error: {exc}")

            return StageResponse(
                success=False,
                data={},
                errors=[error_msg],
                processing_time=elapsed,
                metadata={"stage_name": self.config.name, "failure_reason": str(exc)},
                exception=exc,
            )

    def get_status(self) -> Dict[str, Any]:
        """Mevcut aşama durumunu döner"""
        return {
            "name": self.config.name,
            "progress": self._progress,
            "status": self._status,
            "current_step": self._current_step,
            "config": asdict(self.config),
        }
