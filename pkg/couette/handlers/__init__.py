# Handlers package
