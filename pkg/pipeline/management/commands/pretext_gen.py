from pipeline.management.base import StageCommand
from pipeline.services import StageService


class Command(StageCommand):
    help = 'Build the region-duplication pretext dataset for each pretext fraction'
    stage = 'pretext_gen'

    def run_stage(self, config, options):
        return StageService.pretext_gen(config)
