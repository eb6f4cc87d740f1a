from pipeline.management.base import StageCommand
from pipeline.services import StageService


class Command(StageCommand):
    help = 'Generate the seeded synthetic slice dataset'
    stage = 'synth'

    def run_stage(self, config, options):
        return StageService.synth(config)
