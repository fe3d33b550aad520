from .state import (AuthError, ChallengeState, ConfigError, PhaseError, RateLimited, ServiceError, SubmissionRecord,
                    TeamRecord, ValidationError, choose_preview, create_challenge, preview_size)
from .app import ServiceConfig, create_app, state_from_config
