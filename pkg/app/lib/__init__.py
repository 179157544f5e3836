from .env import env_loader

VERSION = "0.1.0"
