import os

from heps_design.cli import EXIT_OK, EXIT_USAGE, main


def run():
    # full design flow on the reference converter
    out_dir = "out"
    for command in ("design-lr", "gen-data", "train", "optimize", "report"):
        status = main([command, "--out", out_dir, "--jobs", str(os.cpu_count() or 1)])
        if status != EXIT_OK:
            return status
    return main(["select", "--out", out_dir, "--vref", "160", "--power", "500"])


def lambda_handler(event, context):
    # Get parameters from environment variables or event
    command = os.environ.get('COMMAND') or event.get('command')
    bucket_name = os.environ.get('BUCKET_NAME') or event.get('bucket_name')
    args = list(event.get('args', []))

    if not command or not bucket_name:
        return {
            'statusCode': 400,
            'body': 'Missing required parameters: command and bucket_name'
        }

    argv = [command, *args, "--out", os.environ.get('OUT_DIR', '/tmp/heps'), "--s3-bucket", bucket_name,
            "--no-progress"]
    config_path = os.environ.get('CONFIG_PATH') or event.get('config')
    if config_path:
        argv += ["--config", config_path]

    try:
        status = main(argv)
    except Exception as e:
        return {
            'statusCode': 500,
            'body': f'Error running {command}: {str(e)}'
        }
    if status == EXIT_OK:
        return {
            'statusCode': 200,
            'body': f'Successfully ran {command}, artifacts in {bucket_name}'
        }
    return {
        'statusCode': 400 if status == EXIT_USAGE else 500,
        'body': f'{command} exited with status {status}'
    }


# This part is optional and only used when running the script locally
if __name__ == "__main__":
    raise SystemExit(run())
