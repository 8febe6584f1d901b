from jinja2 import Environment, PackageLoader, StrictUndefined

from fdode.services.export import format_value

templates = Environment(
    loader=PackageLoader("fdode", "templates"),
    undefined=StrictUndefined,
    keep_trailing_newline=True,
    trim_blocks=True,
    lstrip_blocks=True,
)
templates.filters["num"] = format_value


def render(template_name: str, **context) -> str:
    return templates.get_template(template_name).render(**context)
