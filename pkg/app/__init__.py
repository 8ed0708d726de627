# OU Schrödinger Bridge App Package
