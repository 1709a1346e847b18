from typing import Annotated
from pydantic import BeforeValidator

# YAML turns numeric bus labels into ints; ids are always compared as strings.
BusId = Annotated[str, BeforeValidator(lambda v: str(v))]
