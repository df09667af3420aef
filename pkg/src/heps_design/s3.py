import logging
import os
from datetime import date as date_type
from typing import List, Optional, Sequence

import boto3
from botocore.exceptions import ClientError

from heps_design.errors import HepsError

logger = logging.getLogger(__name__)


def get_s3_output_path(command: str, filename: str, run_date: Optional[date_type] = None) -> str:
    """
    Generate the S3 key of an artifact produced by a command.

    Args:
        command (str): CLI command that produced the file, e.g. ``optimize``.
        filename (str): Base name of the artifact.
        run_date (Optional[date]): Partition date; today when omitted.

    Returns:
        str: Key of the form ``<command>/date=YYYYMMDD/<filename>``.
    """
    run_date = run_date or date_type.today()
    return f"{command}/date={run_date:%Y%m%d}/{os.path.basename(filename)}"


def upload_to_s3(local_file_path: str, bucket_name: str, s3_key: str, s3_client=None) -> None:
    """
    Upload a local file to S3.

    Args:
        local_file_path (str): The path to the local file to upload.
        bucket_name (str): The name of the S3 bucket.
        s3_key (str): The S3 key (path) where the file will be uploaded.
        s3_client: Client to use; a default one is created when omitted.

    Raises:
        ClientError: If an error occurs during the upload process.
    """
    s3_client = s3_client or boto3.client("s3")
    logger.info("uploading %s to s3://%s/%s", local_file_path, bucket_name, s3_key)
    s3_client.upload_file(local_file_path, bucket_name, s3_key)


def check_bucket_exists(s3_client, bucket_name: str) -> bool:
    """
    Check if an S3 bucket exists and is accessible.

    Args:
        s3_client (boto3.client): The boto3 S3 client.
        bucket_name (str): The name of the bucket to check.

    Returns:
        bool: True if the bucket exists (even without permission), False otherwise.

    Raises:
        ClientError: If an unexpected error occurs while checking the bucket.
    """
    try:
        s3_client.head_bucket(Bucket=bucket_name)
        return True
    except ClientError as e:
        error_code = int(e.response["Error"]["Code"])
        if error_code == 403:
            logger.warning("bucket %s exists, but access is denied", bucket_name)
            return True
        if error_code == 404:
            logger.warning("bucket %s does not exist", bucket_name)
            return False
        raise


def publish_artifacts(paths: Sequence[str], bucket_name: str, command: str, region: Optional[str] = None,
                      run_date: Optional[date_type] = None, s3_client=None) -> List[str]:
    """
    Upload the files written by a command under its dated prefix.

    Args:
        paths (Sequence[str]): Local artifact files.
        bucket_name (str): Target bucket.
        command (str): Producing command, first key component.
        region (Optional[str]): AWS region; the session default when omitted.
        run_date (Optional[date]): Partition date.
        s3_client: Pre-built client (tests pass a mock).

    Returns:
        List[str]: Uploaded keys, in the order of ``paths``.

    Raises:
        HepsError: If the bucket does not exist.
    """
    if s3_client is None:
        s3_client = boto3.client("s3", region_name=region or boto3.Session().region_name)
    if not check_bucket_exists(s3_client, bucket_name):
        raise HepsError(f"S3 bucket {bucket_name} does not exist")
    keys = []
    for path in paths:
        key = get_s3_output_path(command, path, run_date)
        upload_to_s3(path, bucket_name, key, s3_client=s3_client)
        keys.append(key)
    logger.info("published %d artifacts to s3://%s/%s/", len(keys), bucket_name, command)
    return keys
