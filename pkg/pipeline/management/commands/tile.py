from pipeline.management.base import StageCommand
from pipeline.services import StageService


class Command(StageCommand):
    help = 'Cut every dataset slice into non-overlapping square patches'
    stage = 'tile'

    def run_stage(self, config, options):
        return StageService.tile(config)
