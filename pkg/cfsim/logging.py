import logging

cfsimlog = logging.getLogger(__name__)
