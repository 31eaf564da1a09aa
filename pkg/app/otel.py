import contextlib
import logging

from config import settings

logger = logging.getLogger("gndline.otel")


def setup_tracing():
    if not settings.otel_enabled:
        return False
    try:
        from opentelemetry import trace
        from opentelemetry.sdk.resources import Resource
        from opentelemetry.sdk.trace import TracerProvider
        from opentelemetry.sdk.trace.export import BatchSpanProcessor
        from opentelemetry.exporter.otlp.proto.grpc.trace_exporter import OTLPSpanExporter
    except Exception as exc:
        logger.warning("OpenTelemetry not available: %s", exc)
        return False
    resource = Resource.create({"service.name": settings.otel_service_name})
    provider = TracerProvider(resource=resource)
    exporter = OTLPSpanExporter(endpoint=settings.otel_exporter_otlp_endpoint, insecure=True)
    provider.add_span_processor(BatchSpanProcessor(exporter))
    trace.set_tracer_provider(provider)
    logger.info("OpenTelemetry tracing enabled")
    return True


def span(name: str, **attributes):
    """Start a span when the API is importable, else a no-op context."""
    try:
        from opentelemetry import trace
    except Exception:
        return contextlib.nullcontext()
    cm = trace.get_tracer("gndline").start_as_current_span(name)
    if not attributes:
        return cm
    return _with_attributes(cm, attributes)


@contextlib.contextmanager
def _with_attributes(cm, attributes):
    with cm as s:
        for key, value in attributes.items():
            try:
                s.set_attribute(key, value)
            except Exception:
                pass
        yield s
