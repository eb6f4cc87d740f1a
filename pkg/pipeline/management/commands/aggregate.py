from embeddings.vectors import CombinationMethod
from pipeline.management.base import StageCommand
from pipeline.services import StageService


class Command(StageCommand):
    help = 'Combine patch embeddings into slice embeddings (concat and/or sum)'
    stage = 'aggregate'
    per_extractor = True

    def add_stage_arguments(self, parser):
        parser.add_argument(
            '--method',
            action='append',
            choices=[m.value for m in CombinationMethod],
            help='Combination method; repeat for several (default: all)',
        )

    def run_stage(self, config, options):
        return StageService.aggregate(config, options.get('method'), options.get('extractor'))
