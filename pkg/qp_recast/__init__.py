# qp_recast/__init__.py

import logging
from flask import Flask
from prometheus_flask_exporter import PrometheusMetrics
from config import config_by_name

# Create extension instances
metrics = PrometheusMetrics(app=None)


def create_app(config_name="development"):
    """Create and configure an instance of the Flask application."""
    app = Flask(__name__, instance_relative_config=True)

    config_object = config_by_name.get(config_name)
    app.config.from_object(config_object)

    if app.config["METRICS_ENABLED"]:
        metrics.init_app(app)

    # Configure logging and register blueprints
    app.logger.setLevel(app.config["LOG_LEVEL"])
    app.logger.info(f"QP recast service starting up with '{config_name}' config.")
    from .api_routes import api_bp

    app.register_blueprint(api_bp)

    # `flask recast ...` runs the same commands as `python -m qp_recast`
    from .cli import recast

    app.cli.add_command(recast)

    return app
