from ._dotcav import *  # noqa: F401,F403
