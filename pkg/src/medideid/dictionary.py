"""Tag dictionary: value representations, keywords and the basic confidentiality table.

The basic table lists the attributes named by the DICOM PS3.15 basic
application-level confidentiality profile. Compound action codes from the
standard (X/Z, X/D, Z/D, X/Z/D, X/Z/U*) are resolved to the single code that
keeps the dataset IOD-conformant while removing the value: Z, D, Z, Z and K
(the latter for reference sequences, whose nested UIDs are remapped).
"""

from __future__ import annotations

# tag  VR  action  keyword
_BASIC_TABLE = """
0008,0012 DA D InstanceCreationDate
0008,0013 TM Z InstanceCreationTime
0008,0014 UI U InstanceCreatorUID
0008,0015 DT X InstanceCoercionDateTime
0008,0018 UI U SOPInstanceUID
0008,0020 DA Z StudyDate
0008,0021 DA D SeriesDate
0008,0022 DA Z AcquisitionDate
0008,0023 DA Z ContentDate
0008,0024 DA X OverlayDate
0008,0025 DA X CurveDate
0008,002A DT Z AcquisitionDateTime
0008,0030 TM Z StudyTime
0008,0031 TM D SeriesTime
0008,0032 TM Z AcquisitionTime
0008,0033 TM Z ContentTime
0008,0034 TM X OverlayTime
0008,0035 TM X CurveTime
0008,0050 SH Z AccessionNumber
0008,0058 UI U FailedSOPInstanceUIDList
0008,0080 LO Z InstitutionName
0008,0081 ST X InstitutionAddress
0008,0082 SQ Z InstitutionCodeSequence
0008,0090 PN Z ReferringPhysicianName
0008,0092 ST X ReferringPhysicianAddress
0008,0094 SH X ReferringPhysicianTelephoneNumbers
0008,0096 SQ X ReferringPhysicianIdentificationSequence
0008,010D UI U ContextGroupExtensionCreatorUID
0008,0201 SH X TimezoneOffsetFromUTC
0008,1010 SH Z StationName
0008,1030 LO X StudyDescription
0008,103E LO X SeriesDescription
0008,1040 LO X InstitutionalDepartmentName
0008,1048 PN X PhysiciansOfRecord
0008,1049 SQ X PhysiciansOfRecordIdentificationSequence
0008,1050 PN X PerformingPhysicianName
0008,1052 SQ X PerformingPhysicianIdentificationSequence
0008,1060 PN X NameOfPhysiciansReadingStudy
0008,1062 SQ X PhysiciansReadingStudyIdentificationSequence
0008,1070 PN Z OperatorsName
0008,1072 SQ X OperatorIdentificationSequence
0008,1080 LO X AdmittingDiagnosesDescription
0008,1084 SQ X AdmittingDiagnosesCodeSequence
0008,1110 SQ Z ReferencedStudySequence
0008,1111 SQ Z ReferencedPerformedProcedureStepSequence
0008,1120 SQ X ReferencedPatientSequence
0008,1140 SQ K ReferencedImageSequence
0008,1155 UI U ReferencedSOPInstanceUID
0008,1195 UI U TransactionUID
0008,1250 SQ X RelatedSeriesSequence
0008,2112 SQ K SourceImageSequence
0008,3010 UI U IrradiationEventUID
0008,4000 LT X IdentifyingComments
0008,9123 UI U CreatorVersionUID
0010,0010 PN Z PatientName
0010,0020 LO Z PatientID
0010,0021 LO X IssuerOfPatientID
0010,0030 DA Z PatientBirthDate
0010,0032 TM X PatientBirthTime
0010,0040 CS Z PatientSex
0010,0050 SQ X PatientInsurancePlanCodeSequence
0010,1000 LO X OtherPatientIDs
0010,1001 PN X OtherPatientNames
0010,1002 SQ X OtherPatientIDsSequence
0010,1005 PN X PatientBirthName
0010,1010 AS X PatientAge
0010,1020 DS X PatientSize
0010,1030 DS X PatientWeight
0010,1040 LO X PatientAddress
0010,1050 LO X InsurancePlanIdentification
0010,1060 PN X PatientMotherBirthName
0010,1080 LO X MilitaryRank
0010,1081 LO X BranchOfService
0010,1090 LO X MedicalRecordLocator
0010,2000 LO X MedicalAlerts
0010,2110 LO X Allergies
0010,2150 LO X CountryOfResidence
0010,2152 LO X RegionOfResidence
0010,2154 SH X PatientTelephoneNumbers
0010,2160 SH X EthnicGroup
0010,2180 SH X Occupation
0010,21A0 CS X SmokingStatus
0010,21B0 LT X AdditionalPatientHistory
0010,21C0 US X PregnancyStatus
0010,21D0 DA X LastMenstrualDate
0010,2203 CS Z PatientSexNeutered
0010,2297 PN X ResponsiblePerson
0010,2299 LO X ResponsibleOrganization
0010,4000 LT X PatientComments
0018,0010 LO Z ContrastBolusAgent
0018,1000 LO Z DeviceSerialNumber
0018,1002 UI U DeviceUID
0018,1004 LO X PlateID
0018,1005 LO X GeneratorID
0018,1007 LO X CassetteID
0018,1008 LO X GantryID
0018,1012 DA X DateOfSecondaryCapture
0018,1014 TM X TimeOfSecondaryCapture
0018,1030 LO D ProtocolName
0018,1200 DA X DateOfLastCalibration
0018,1201 TM X TimeOfLastCalibration
0018,1400 LO D AcquisitionDeviceProcessingDescription
0018,4000 LT X AcquisitionComments
0018,700A SH D DetectorID
0018,9074 DT X FrameAcquisitionDateTime
0018,9151 DT X FrameReferenceDateTime
0018,9424 LT X AcquisitionProtocolDescription
0018,A003 ST X ContributionDescription
0020,000D UI U StudyInstanceUID
0020,000E UI U SeriesInstanceUID
0020,0010 SH Z StudyID
0020,0052 UI U FrameOfReferenceUID
0020,0200 UI U SynchronizationFrameOfReferenceUID
0020,3401 LO X ModifyingDeviceID
0020,3404 LO X ModifyingDeviceManufacturer
0020,3406 LO X ModifiedImageDescription
0020,4000 LT X ImageComments
0020,9158 LT X FrameComments
0020,9161 UI U ConcatenationUID
0020,9164 UI U DimensionOrganizationUID
0028,1199 UI U PaletteColorLookupTableUID
0028,1214 UI U LargePaletteColorLookupTableUID
0028,4000 LT X ImagePresentationComments
0032,0012 LO X StudyIDIssuer
0032,1020 LO X ScheduledStudyLocation
0032,1021 AE X ScheduledStudyLocationAETitle
0032,1030 LO X ReasonForStudy
0032,1032 PN X RequestingPhysician
0032,1033 LO X RequestingService
0032,1060 LO Z RequestedProcedureDescription
0032,1070 LO X RequestedContrastAgent
0032,4000 LT X StudyComments
0038,0010 LO X AdmissionID
0038,0011 LO X IssuerOfAdmissionID
0038,001E LO X ScheduledPatientInstitutionResidence
0038,0020 DA X AdmittingDate
0038,0021 TM X AdmittingTime
0038,0040 LO X DischargeDiagnosisDescription
0038,0050 LO X SpecialNeeds
0038,0060 LO X ServiceEpisodeID
0038,0061 LO X IssuerOfServiceEpisodeID
0038,0062 LO X ServiceEpisodeDescription
0038,0300 LO X CurrentPatientLocation
0038,0500 LO X PatientState
0038,4000 LT X VisitComments
0040,0001 AE X ScheduledStationAETitle
0040,0002 DA X ScheduledProcedureStepStartDate
0040,0003 TM X ScheduledProcedureStepStartTime
0040,0004 DA X ScheduledProcedureStepEndDate
0040,0005 TM X ScheduledProcedureStepEndTime
0040,0006 PN X ScheduledPerformingPhysicianName
0040,0007 LO X ScheduledProcedureStepDescription
0040,000B SQ X ScheduledPerformingPhysicianIdentificationSequence
0040,0010 SH X ScheduledStationName
0040,0011 SH X ScheduledProcedureStepLocation
0040,0012 LO X PreMedication
0040,0241 AE X PerformedStationAETitle
0040,0242 SH X PerformedStationName
0040,0243 SH X PerformedLocation
0040,0244 DA X PerformedProcedureStepStartDate
0040,0245 TM X PerformedProcedureStepStartTime
0040,0253 SH X PerformedProcedureStepID
0040,0254 LO X PerformedProcedureStepDescription
0040,0275 SQ X RequestAttributesSequence
0040,0280 ST X CommentsOnPerformedProcedureStep
0040,0555 SQ X AcquisitionContextSequence
0040,1001 SH X RequestedProcedureID
0040,1004 LO X PatientTransportArrangements
0040,1005 LO X RequestedProcedureLocation
0040,1010 PN X NamesOfIntendedRecipientsOfResults
0040,1011 SQ X IntendedRecipientsOfResultsIdentificationSequence
0040,1101 SQ D PersonIdentificationCodeSequence
0040,1102 ST X PersonAddress
0040,1103 LO X PersonTelephoneNumbers
0040,1400 LT X RequestedProcedureComments
0040,2001 LO X ReasonForImagingServiceRequest
0040,2008 PN X OrderEnteredBy
0040,2009 SH X OrderEntererLocation
0040,2010 SH X OrderCallbackPhoneNumber
0040,2016 LO Z PlacerOrderNumberImagingServiceRequest
0040,2017 LO Z FillerOrderNumberImagingServiceRequest
0040,2400 LT X ImagingServiceRequestComments
0040,3001 LO X ConfidentialityConstraintOnPatientDataDescription
0040,4023 UI U ReferencedGeneralPurposeScheduledProcedureStepTransactionUID
0040,4025 SQ X ScheduledStationNameCodeSequence
0040,4027 SQ X ScheduledStationGeographicLocationCodeSequence
0040,4034 SQ X ScheduledHumanPerformersSequence
0040,4035 SQ X ActualHumanPerformersSequence
0040,4036 LO X HumanPerformerOrganization
0040,4037 PN X HumanPerformerName
0040,A027 LO X VerifyingOrganization
0040,A073 SQ D VerifyingObserverSequence
0040,A075 PN D VerifyingObserverName
0040,A078 SQ X AuthorObserverSequence
0040,A07A SQ X ParticipantSequence
0040,A07C SQ X CustodialOrganizationSequence
0040,A088 SQ Z VerifyingObserverIdentificationCodeSequence
0040,A123 PN D PersonName
0040,A124 UI U UID
0040,A171 UI U ObservationUID
0040,A730 SQ X ContentSequence
0040,DB0C UI U TemplateExtensionOrganizationUID
0040,DB0D UI U TemplateExtensionCreatorUID
0062,0021 UI U TrackingUID
0070,0001 SQ D GraphicAnnotationSequence
0070,0084 PN Z ContentCreatorName
0070,031A UI U FiducialUID
0088,0140 UI U StorageMediaFileSetUID
0088,0200 SQ X IconImageSequence
0088,0904 LO X TopicTitle
0088,0906 ST X TopicSubject
0088,0910 LO X TopicAuthor
0088,0912 LO X TopicKeywords
0400,0402 SQ X ReferencedDigitalSignatureSequence
0400,0404 OB X MAC
0400,0550 SQ X ModifiedAttributesSequence
0400,0561 SQ X OriginalAttributesSequence
2030,0020 LO X TextString
3006,0024 UI U ReferencedFrameOfReferenceUID
3006,00C2 UI U RelatedFrameOfReferenceUID
300A,0013 UI U DoseReferenceUID
300E,0008 PN Z ReviewerName
4000,0010 LT X Arbitrary
4000,4000 LT X TextComments
4008,0042 LO X ResultsIDIssuer
4008,0102 PN X InterpretationRecorder
4008,010A PN X InterpretationTranscriber
4008,010B ST X InterpretationText
4008,010C PN X InterpretationAuthor
4008,0111 SQ X InterpretationApproverSequence
4008,0114 PN X PhysicianApprovingInterpretation
4008,0115 LT X InterpretationDiagnosisDescription
4008,0118 SQ X ResultsDistributionListSequence
4008,0119 PN X DistributionName
4008,011A LO X DistributionAddress
4008,0202 LO X InterpretationIDIssuer
4008,0300 ST X Impressions
4008,4000 ST X ResultsComments
FFFC,FFFC OB X DataSetTrailingPadding
"""

# Masked entries of the basic table; "x" matches any hex digit.
BASIC_MASKED = {
    "50xx,xxxx": "X",  # retired curve data
    "60xx,3000": "X",  # overlay data
    "60xx,4000": "X",  # overlay comments
    "xxxx,0000": "X",  # legacy group lengths go stale after edits
}

# Attributes the tool reads or writes but the table does not name.
_EXTRA_VRS = """
0002,0000 UL FileMetaInformationGroupLength
0002,0001 OB FileMetaInformationVersion
0002,0002 UI MediaStorageSOPClassUID
0002,0003 UI MediaStorageSOPInstanceUID
0002,0010 UI TransferSyntaxUID
0002,0012 UI ImplementationClassUID
0002,0013 SH ImplementationVersionName
0002,0016 AE SourceApplicationEntityTitle
0008,0005 CS SpecificCharacterSet
0008,0008 CS ImageType
0008,0016 UI SOPClassUID
0008,0060 CS Modality
0008,0070 LO Manufacturer
0008,1090 LO ManufacturerModelName
0012,0062 CS PatientIdentityRemoved
0012,0063 LO DeidentificationMethod
0018,0050 DS SliceThickness
0018,0088 DS SpacingBetweenSlices
0020,0011 IS SeriesNumber
0020,0013 IS InstanceNumber
0020,0032 DS ImagePositionPatient
0020,0037 DS ImageOrientationPatient
0028,0002 US SamplesPerPixel
0028,0004 CS PhotometricInterpretation
0028,0006 US PlanarConfiguration
0028,0008 IS NumberOfFrames
0028,0010 US Rows
0028,0011 US Columns
0028,0030 DS PixelSpacing
0028,0100 US BitsAllocated
0028,0101 US BitsStored
0028,0102 US HighBit
0028,0103 US PixelRepresentation
0028,0301 CS BurnedInAnnotation
0028,1052 DS RescaleIntercept
0028,1053 DS RescaleSlope
7FE0,0010 OW PixelData
"""


def _rows(text):
    for line in text.strip().splitlines():
        parts = line.split()
        if not parts:
            continue
        group, element = (int(p, 16) for p in parts[0].split(","))
        yield (group, element), parts[1:]


# File meta attributes carrying instance identity or sender identity. The
# confidentiality table does not list group 0002, but the media storage UID
# must follow the remapped SOP Instance UID.
_META_TABLE = """
0002,0003 UI U MediaStorageSOPInstanceUID
0002,0016 AE X SourceApplicationEntityTitle
0002,0017 AE X SendingApplicationEntityTitle
0002,0018 AE X ReceivingApplicationEntityTitle
0002,0100 UI X PrivateInformationCreatorUID
0002,0102 OB X PrivateInformation
"""

BASIC_ACTIONS: dict[tuple[int, int], str] = {}
VR_DICT: dict[tuple[int, int], str] = {}
KEYWORDS: dict[tuple[int, int], str] = {}

for _tag, (_vr, _action, _kw) in _rows(_BASIC_TABLE + _META_TABLE):
    BASIC_ACTIONS[_tag] = _action
    VR_DICT[_tag] = _vr
    KEYWORDS[_tag] = _kw
for _tag, (_vr, _kw) in _rows(_EXTRA_VRS):
    VR_DICT.setdefault(_tag, _vr)
    KEYWORDS.setdefault(_tag, _kw)

TAG_BY_KEYWORD = {kw: tag for tag, kw in KEYWORDS.items()}


def lookup_vr(tag) -> str | None:
    tag = tuple(tag)
    if tag in VR_DICT:
        return VR_DICT[tag]
    group, element = tag
    if element == 0x0000:
        return "UL"
    if group & 0xFF00 == 0x6000:
        return {0x3000: "OW", 0x4000: "LT"}.get(element)
    return None


def keyword(tag) -> str:
    return KEYWORDS.get(tuple(tag), "")
